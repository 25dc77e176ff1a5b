//! Point sets of the discrete Monge-Ampère gravitational model.
//!
//! `m` particles on the torus `𝕋ⁿ` with reference positions `a_1..a_m` are
//! lifted to a single point of `ℝ^{nm}`. The attracting set is the union over
//! permutations `σ` of the lattices `(a_σ(1), …, a_σ(m)) + ℤ^{nm}`, truncated
//! to translates with `‖z‖_∞ ≤ W`.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::action::{minimize, Path, Shape, SolveResult, SolverConfig};
use crate::geometry::{PointSet, MAX_DIM};
use crate::{Error, Result};

pub const MAX_PARTICLES: usize = 5;
pub const POINT_BUDGET: usize = 1_000_000;
/// Largest window tried when enlarging it to satisfy the certificate.
const MAX_WINDOW_GROWTH: usize = 8;

/// Permutation and lattice translate that produced a point of `K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MagLabel {
    pub permutation: Vec<usize>,
    pub shift: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct MagSystem {
    pub n: usize,
    pub m: usize,
    pub base_points: Vec<Vec<f64>>,
    pub window: usize,
    pub k: PointSet,
    pub labels: Vec<MagLabel>,
}

fn factorial(m: usize) -> usize {
    (1..=m).product()
}

/// `m!·(2W+1)^{nm}`, saturating.
pub fn mag_size(n: usize, m: usize, window: usize) -> usize {
    let side = 2 * window + 1;
    (0..n * m).fold(factorial(m), |acc, _| acc.saturating_mul(side))
}

pub fn build_mag(base_points: &[Vec<f64>], n: usize, m: usize, window: usize) -> Result<MagSystem> {
    if m == 0 || m > MAX_PARTICLES {
        return Err(Error::InvalidArgument(format!(
            "particle count must be in 1..={MAX_PARTICLES}"
        )));
    }
    if n == 0 || n * m > MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "lifted dimension n·m must be in 1..={MAX_DIM}"
        )));
    }
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if base_points.len() != m {
        return Err(Error::InvalidArgument(format!(
            "expected {m} base points, got {}",
            base_points.len()
        )));
    }
    for a in base_points {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        if a.iter().any(|c| !(c.is_finite() && *c >= 0.0 && *c < 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "base point {a:?} is not in [0,1)^n"
            )));
        }
    }
    for (i, j) in (0..m).tuple_combinations() {
        if base_points[i] == base_points[j] {
            return Err(Error::InvalidArgument(format!(
                "base points {i} and {j} coincide"
            )));
        }
    }
    let count = mag_size(n, m, window);
    if count > POINT_BUDGET {
        return Err(Error::BudgetExceeded {
            count,
            budget: POINT_BUDGET,
        });
    }

    let w = window as i64;
    let dim = n * m;
    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for perm in (0..m).permutations(m) {
        let base: Vec<f64> = perm
            .iter()
            .flat_map(|&i| base_points[i].iter().copied())
            .collect();
        for shift in (0..dim).map(|_| -w..=w).multi_cartesian_product() {
            points.push(
                base.iter()
                    .zip(&shift)
                    .map(|(b, &z)| b + z as f64)
                    .collect(),
            );
            labels.push(MagLabel {
                permutation: perm.clone(),
                shift,
            });
        }
    }
    Ok(MagSystem {
        n,
        m,
        base_points: base_points.to_vec(),
        window,
        k: PointSet::new(points)?,
        labels,
    })
}

impl MagSystem {
    pub fn dim(&self) -> usize {
        self.n * self.m
    }
}

/// True when no node of the path has a nearest point on the boundary layer
/// `‖z‖_∞ = W` of the truncated lattices.
pub fn window_certificate(system: &MagSystem, path: &Path) -> Result<bool> {
    system.k.check_dim(path.start())?;
    let w = system.window as i64;
    Ok(path.nodes().iter().all(|x| {
        system
            .k
            .tied_indices(x)
            .iter()
            .all(|&i| system.labels[i].shift.iter().all(|z| z.abs() < w))
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct ParticlePaths {
    /// `lifted[i][k]` is particle `i` at node `k`.
    pub lifted: Vec<Vec<Vec<f64>>>,
    /// The same positions reduced componentwise modulo 1.
    pub torus: Vec<Vec<Vec<f64>>>,
}

pub fn particle_paths(system: &MagSystem, path: &Path) -> Result<ParticlePaths> {
    if path.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            got: path.dim(),
        });
    }
    let n = system.n;
    let lifted: Vec<Vec<Vec<f64>>> = (0..system.m)
        .map(|i| {
            path.nodes()
                .iter()
                .map(|x| x[i * n..(i + 1) * n].to_vec())
                .collect()
        })
        .collect();
    let torus = lifted
        .iter()
        .map(|traj| {
            traj.iter()
                .map(|y| y.iter().map(|c| c.rem_euclid(1.0)).collect())
                .collect()
        })
        .collect();
    Ok(ParticlePaths { lifted, torus })
}

/// `ceil(max |coordinate| over both endpoints) + 1`.
pub fn default_window(x0: &[f64], xdelta: &[f64]) -> usize {
    let r = x0.iter().chain(xdelta).fold(0.0f64, |a, c| a.max(c.abs()));
    r.ceil() as usize + 1
}

#[derive(Debug, Clone)]
pub struct MagRun {
    pub system: MagSystem,
    pub result: SolveResult,
}

/// Minimizes on the truncated set, enlarging `W` from
/// [`default_window`] until [`window_certificate`] holds for the result.
pub fn solve_mag(
    base_points: &[Vec<f64>],
    n: usize,
    m: usize,
    x0: &[f64],
    xdelta: &[f64],
    delta: f64,
    h: Shape,
    cfg: &SolverConfig,
) -> Result<MagRun> {
    let first = default_window(x0, xdelta);
    for window in first..first + MAX_WINDOW_GROWTH {
        let system = build_mag(base_points, n, m, window)?;
        let result = minimize(x0, xdelta, delta, &system.k, h, cfg)?;
        if window_certificate(&system, &result.path)? {
            return Ok(MagRun { system, result });
        }
    }
    Err(Error::InvalidArgument(format!(
        "window certificate failed up to W = {}; raise the window",
        first + MAX_WINDOW_GROWTH - 1
    )))
}

/// Minimal actions for a sequence of point sets and endpoints, solved in
/// parallel and returned in input order.
pub fn stability_run(
    sets: &[PointSet],
    endpoints: &[(Vec<f64>, Vec<f64>)],
    delta: f64,
    h: Shape,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    if sets.len() != endpoints.len() {
        return Err(Error::InvalidArgument(
            "one endpoint pair is needed per point set".into(),
        ));
    }
    if let Some(first) = sets.first() {
        if let Some(bad) = sets.iter().find(|s| s.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: bad.dim(),
            });
        }
    }
    sets.par_iter()
        .zip(endpoints.par_iter())
        .map(|(k, (x0, x1))| minimize(x0, x1, delta, k, h, cfg).map(|r| r.breakdown.total))
        .collect()
}
