use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Path, Shape, SolverConfig};
use crate::geometry::Polytope;
use crate::linalg::{dist2, dot, norm, solve_block_tridiagonal};
use crate::{Error, Result};

/// A halfspace counts as active within this slack.
const ACTIVE_SLACK: f64 = 1e-10;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
/// Accelerated iterations spent settling the active set before the face
/// polish.
const FISTA_WARMUP: usize = 500;

#[derive(Debug, Clone, Serialize)]
pub struct ConstrainedResult {
    pub path: Path,
    pub value: f64,
    /// `max_k |G_k| / Δt` for the projected-gradient map
    /// `G = L(γ − Π_P(γ − ∇J/L))`.
    pub residual: f64,
    pub converged: bool,
}

/// Minimizes `Σ|Δγ|²/Δt + Δt·Σ h(|γ_k − c|²)` (trapezoid weights) over
/// paths with every node in `P`, by accelerated projected gradient with
/// backtracking and restarts, then preconditioned descent on the active
/// faces. Refined through the same mesh stages as the unconstrained
/// solver.
pub fn constrained_minimize(
    x0: &[f64],
    xdelta: &[f64],
    delta: f64,
    p: &Polytope,
    psi_center: &[f64],
    h: Shape,
    cfg: &SolverConfig,
) -> Result<ConstrainedResult> {
    cfg.validate()?;
    h.validate()?;
    let d = p.dim();
    for v in [x0, xdelta, psi_center] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    for x in [x0, xdelta] {
        if !p.contains(x, 1e-9 * (1.0 + norm(x))) {
            return Err(Error::InfeasibleEndpoints(format!(
                "{x:?} lies outside the polytope"
            )));
        }
    }
    let obj = Objective {
        p,
        c: psi_center,
        h,
    };
    let mut path = Path::straight(x0, xdelta, delta, cfg.coarse_intervals())?;
    let mut out = obj.solve(&path, cfg)?;
    for _ in 0..cfg.refinements {
        path = out.path.refine();
        out = obj.solve(&path, cfg)?;
    }
    Ok(out)
}

struct Objective<'a> {
    p: &'a Polytope,
    c: &'a [f64],
    h: Shape,
}

impl Objective<'_> {
    fn value(&self, x: &[Vec<f64>], dt: f64) -> f64 {
        let m = x.len() - 1;
        let mut kin = 0.0;
        for j in 0..m {
            kin += dist2(&x[j], &x[j + 1]);
        }
        let mut pot = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let w = if j == 0 || j == m { 0.5 } else { 1.0 };
            pot += w * self.h.eval(dist2(xj, self.c));
        }
        kin / dt + dt * pot
    }

    fn gradient(&self, x: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
        let m = x.len() - 1;
        let d = x[0].len();
        let mut g = vec![vec![0.0; d]; m + 1];
        for j in 1..m {
            let f = self.h.force_factor(dist2(&x[j], self.c));
            for i in 0..d {
                g[j][i] = 2.0 * (2.0 * x[j][i] - x[j - 1][i] - x[j + 1][i]) / dt
                    + dt * f * 2.0 * (x[j][i] - self.c[i]);
            }
        }
        g
    }

    fn step(&self, y: &[Vec<f64>], g: &[Vec<f64>], l: f64) -> Vec<Vec<f64>> {
        let m = y.len() - 1;
        let mut z = y.to_vec();
        for j in 1..m {
            let trial: Vec<f64> = y[j].iter().zip(&g[j]).map(|(a, b)| a - b / l).collect();
            z[j] = self.p.project(&trial);
        }
        z
    }

    fn residual(&self, x: &[Vec<f64>], dt: f64, l: f64) -> f64 {
        let g = self.gradient(x, dt);
        let z = self.step(x, &g, l);
        x.iter()
            .zip(&z)
            .map(|(a, b)| l * dist2(a, b).sqrt() / dt)
            .fold(0.0, f64::max)
    }

    fn solve(&self, start: &Path, cfg: &SolverConfig) -> Result<ConstrainedResult> {
        let first = self.fista(start, cfg.max_iters.min(FISTA_WARMUP), cfg.grad_tol)?;
        if first.converged {
            return Ok(first);
        }
        let second = self.face_polish(&first.path, cfg)?;
        Ok(if second.residual < first.residual {
            second
        } else {
            first
        })
    }

    /// Orthonormal basis of the directions that keep every active halfspace
    /// of node `x` active, after releasing constraints whose multiplier for
    /// `g` has the wrong sign.
    fn face_basis(&self, x: &[f64], g: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let mut active: Vec<&[f64]> = self
            .p
            .halfspaces()
            .iter()
            .filter(|hs| hs.violation(x) >= -ACTIVE_SLACK * (1.0 + hs.offset.abs()))
            .map(|hs| hs.normal.as_slice())
            .collect();
        // KKT: g + Nλ = 0 on the normal space with λ ≥ 0.
        while !active.is_empty() {
            let n = DMatrix::from_fn(d, active.len(), |r, c| active[c][r]);
            let Some(lambda) = n
                .clone()
                .svd(true, true)
                .solve(&(-DVector::from_column_slice(g)), 1e-12)
                .ok()
            else {
                break;
            };
            let (worst, &val) = lambda
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty");
            if val >= -1e-14 {
                break;
            }
            active.remove(worst);
        }
        if active.is_empty() {
            return DMatrix::identity(d, d);
        }
        // Eigenvectors of the projector onto the null space of the normals.
        let n = DMatrix::from_fn(d, active.len(), |r, c| active[c][r]);
        let pinv = n
            .clone()
            .pseudo_inverse(1e-10)
            .expect("nonnegative epsilon");
        let proj = DMatrix::identity(d, d) - &n * pinv;
        let eig = proj.symmetric_eigen();
        let keep: Vec<usize> = (0..d).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        DMatrix::from_fn(d, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
    }

    /// Preconditioned descent restricted to the active faces, with the
    /// trial points projected back onto `P`.
    fn face_polish(&self, start: &Path, cfg: &SolverConfig) -> Result<ConstrainedResult> {
        let dt = start.dt();
        let m = start.intervals();
        let d = start.dim();
        let l = 8.0 / dt;
        let mut x: Vec<Vec<f64>> = start.nodes().to_vec();
        let mut fx = self.value(&x, dt);
        let mut residual = self.residual(&x, dt, l);
        let mut alpha = 1.0f64;
        for _ in 0..cfg.max_iters {
            if residual <= cfg.grad_tol {
                break;
            }
            let g = self.gradient(&x, dt);
            let bases: Vec<DMatrix<f64>> = (1..m).map(|j| self.face_basis(&x[j], &g[j])).collect();
            let diag: Vec<DMatrix<f64>> = bases
                .iter()
                .map(|q| DMatrix::identity(q.ncols(), q.ncols()) * (4.0 / dt + 2.0 * dt))
                .collect();
            let upper: Vec<DMatrix<f64>> = (0..bases.len())
                .map(|i| match bases.get(i + 1) {
                    Some(next) => bases[i].transpose() * next * (-2.0 / dt),
                    None => DMatrix::zeros(bases[i].ncols(), 0),
                })
                .collect();
            let mut rhs: Vec<DVector<f64>> = bases
                .iter()
                .enumerate()
                .map(|(i, q)| -(q.transpose() * DVector::from_column_slice(&g[i + 1])))
                .collect();
            if !solve_block_tridiagonal(&diag, &upper, &mut rhs) {
                break;
            }
            let mut dir = vec![vec![0.0; d]; m + 1];
            let mut slope = 0.0;
            for (i, q) in bases.iter().enumerate() {
                let v = q * &rhs[i];
                dir[i + 1].copy_from_slice(v.as_slice());
                slope += dot(&g[i + 1], &dir[i + 1]);
            }
            if !(slope < 0.0) {
                break;
            }
            alpha = (2.0 * alpha).min(1.0);
            let noise = -slope < 1e-10 * (1.0 + fx.abs());
            let mut accepted = false;
            while alpha >= MIN_STEP {
                let mut trial = x.clone();
                for j in 1..m {
                    let moved: Vec<f64> = x[j]
                        .iter()
                        .zip(&dir[j])
                        .map(|(a, b)| a + alpha * b)
                        .collect();
                    trial[j] = self.p.project(&moved);
                }
                let ft = self.value(&trial, dt);
                let better = ft <= fx + ARMIJO * alpha * slope;
                // In the rounding regime, steps are judged by the residual.
                let rt = if better && !noise {
                    None
                } else {
                    Some(self.residual(&trial, dt, l))
                };
                if better
                    || (noise
                        && rt.is_some_and(|r| r < residual)
                        && ft <= fx + 1e-12 * (1.0 + fx.abs()))
                {
                    residual = rt.unwrap_or_else(|| self.residual(&trial, dt, l));
                    x = trial;
                    fx = ft;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(ConstrainedResult {
            path: Path::new(start.delta(), x)?,
            value: fx,
            residual,
            converged: residual <= cfg.grad_tol,
        })
    }

    fn fista(&self, start: &Path, max_iters: usize, grad_tol: f64) -> Result<ConstrainedResult> {
        let dt = start.dt();
        let mut x: Vec<Vec<f64>> = start.nodes().to_vec();
        let mut fx = self.value(&x, dt);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut l = 8.0 / dt;
        let mut residual = f64::INFINITY;
        for it in 0..max_iters {
            if it % 10 == 0 {
                residual = self.residual(&x, dt, l);
                if residual <= grad_tol {
                    break;
                }
            }
            let fy = self.value(&y, dt);
            let gy = self.gradient(&y, dt);
            let (z, fz) = loop {
                let z = self.step(&y, &gy, l);
                let fz = self.value(&z, dt);
                let mut lin = 0.0;
                let mut quad = 0.0;
                for j in 0..z.len() {
                    for i in 0..z[j].len() {
                        let dz = z[j][i] - y[j][i];
                        lin += gy[j][i] * dz;
                        quad += dz * dz;
                    }
                }
                if fz <= fy + lin + 0.5 * l * quad + 1e-14 * fy.abs() || l > 1e300 {
                    break (z, fz);
                }
                l *= 2.0;
            };
            if fz > fx {
                // Momentum overshoot: restart from the current iterate.
                y = x.clone();
                t = 1.0;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = z
                .iter()
                .zip(&x)
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + beta * (p - q)).collect())
                .collect();
            x = z;
            fx = fz;
            t = t_next;
        }
        residual = residual.min(self.residual(&x, dt, l));
        Ok(ConstrainedResult {
            path: Path::new(start.delta(), x)?,
            value: fx,
            residual,
            converged: residual <= grad_tol,
        })
    }
}
