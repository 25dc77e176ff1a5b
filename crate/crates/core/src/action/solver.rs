use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dp::{dp_oracle, seed_grid};
use super::functional::{evaluate_action, node_state, NodeState};
use super::{ActionBreakdown, Path, Shape};
use crate::geometry::{affine_frame, AffineFrame, PointSet};
use crate::linalg::{dist2, solve_block_tridiagonal};
use crate::{Error, Result};

/// Armijo sufficient-decrease constant.
const ARMIJO: f64 = 1e-4;
/// Relative slack absorbing rounding in the objective comparison.
const ROUNDING_SLACK: f64 = 1e-14;
const MIN_STEP: f64 = 1e-12;
/// Consecutive iterations without relative progress before giving up.
const STAGNATION_LIMIT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Intervals `M` of the final mesh.
    pub intervals: usize,
    /// Mesh-doubling stages; the coarsest mesh has `M / 2^refinements`
    /// intervals.
    pub refinements: usize,
    /// Straight-line plus perturbed starts on the coarsest mesh.
    pub starts: usize,
    pub seed: u64,
    pub step_init: f64,
    /// Bound on `max_k |∂J/∂γ_k| / Δt` (projected onto the constraint
    /// spaces of pinned nodes).
    pub grad_tol: f64,
    /// Descent iterations per polishing run.
    pub max_iters: usize,
    /// Adds a dynamic-programming start when `d ≤ 3`.
    pub dp_seed: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            intervals: 512,
            refinements: 4,
            starts: 4,
            seed: 0,
            step_init: 1.0,
            grad_tol: 1e-6,
            max_iters: 20_000,
            dp_seed: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.starts == 0 || self.max_iters == 0 {
            return bad("starts and max_iters must be positive");
        }
        if !(self.step_init.is_finite() && self.step_init > 0.0) {
            return bad("step_init must be positive");
        }
        if !(self.grad_tol.is_finite() && self.grad_tol >= 1e-12) {
            return bad("grad_tol must be at least 1e-12");
        }
        if self.refinements >= usize::BITS as usize
            || !self.intervals.is_multiple_of(1usize << self.refinements)
            || self.coarse_intervals() < 2
        {
            return bad(
                "intervals must be divisible by 2^refinements with at least 2 coarse intervals",
            );
        }
        Ok(())
    }

    pub fn coarse_intervals(&self) -> usize {
        self.intervals >> self.refinements
    }
}

/// Result of one mesh stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub intervals: usize,
    pub action: f64,
    pub converged: bool,
    pub residual: f64,
    pub path: Path,
}

/// Local minimizer reached from one start on the coarsest mesh.
#[derive(Debug, Clone, Serialize)]
pub struct StartRecord {
    pub label: String,
    pub action: f64,
    pub converged: bool,
    pub residual: f64,
    /// Index of an earlier start that reached the same local minimizer.
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub path: Path,
    pub breakdown: ActionBreakdown,
    pub converged: bool,
    pub residual: f64,
    pub stages: Vec<StageRecord>,
    pub starts: Vec<StartRecord>,
}

/// Multi-start minimization of the discrete action with mesh refinement.
///
/// Each start is polished by preconditioned gradient descent in which nodes
/// lying on a bisector (class of size > 1) move only inside `B_H`; between
/// polishing runs, single nodes are snapped onto or released from
/// neighbouring bisectors whenever that lowers the action.
pub fn minimize(
    x0: &[f64],
    xdelta: &[f64],
    delta: f64,
    k: &PointSet,
    h: Shape,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    cfg.validate()?;
    h.validate()?;
    k.check_dim(x0)?;
    k.check_dim(xdelta)?;
    if x0.iter().chain(xdelta).any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("endpoints must be finite".into()));
    }
    let problem = Problem { k, h, cfg };
    let m0 = cfg.coarse_intervals();

    let mut seeds: Vec<(String, Path)> =
        vec![("straight".into(), Path::straight(x0, xdelta, delta, m0)?)];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sigma = 0.2 * crate::linalg::dist(x0, xdelta).max(0.1);
    for i in 1..cfg.starts {
        seeds.push((
            format!("perturbed-{i}"),
            perturbed(x0, xdelta, delta, m0, sigma, &mut rng)?,
        ));
    }
    if cfg.dp_seed && k.dim() <= 3 {
        let grid = seed_grid(x0, xdelta, k, m0);
        if let Ok(dp) = dp_oracle(x0, xdelta, delta, k, h, &grid) {
            seeds.push(("dp".into(), dp.path));
        }
    }

    let outcomes: Vec<Result<(Path, Polished)>> = seeds
        .par_iter()
        .map(|(_, p)| problem.improve(p.clone()))
        .collect();
    let mut starts: Vec<StartRecord> = Vec::with_capacity(seeds.len());
    let mut reached: Vec<Option<Path>> = Vec::with_capacity(seeds.len());
    let mut best: Option<(usize, Path, Polished)> = None;
    let mut first_err = None;
    for (i, ((label, _), out)) in seeds.iter().zip(outcomes).enumerate() {
        match out {
            Ok((path, pol)) => {
                let duplicate_of = starts.iter().enumerate().position(|(j, s)| {
                    reached[j].as_ref().is_some_and(|q| {
                        (s.action - pol.value).abs() <= 1e-6 * (1.0 + pol.value.abs())
                            && q.max_distance(&path) <= 1e-3
                    })
                });
                starts.push(StartRecord {
                    label: label.clone(),
                    action: pol.value,
                    converged: pol.converged,
                    residual: pol.residual,
                    duplicate_of,
                });
                reached.push(Some(path.clone()));
                if best.as_ref().is_none_or(|b| pol.value < b.2.value) {
                    best = Some((i, path, pol));
                }
            }
            Err(e) => {
                starts.push(StartRecord {
                    label: label.clone(),
                    action: f64::NAN,
                    converged: false,
                    residual: f64::NAN,
                    duplicate_of: None,
                });
                reached.push(None);
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((_, mut path, mut pol)) = best else {
        return Err(first_err.unwrap_or_else(|| Error::InvalidArgument("no starts".into())));
    };

    let mut stages = vec![StageRecord {
        intervals: path.intervals(),
        action: pol.value,
        converged: pol.converged,
        residual: pol.residual,
        path: path.clone(),
    }];
    for _ in 0..cfg.refinements {
        let (p, q) = problem.improve(path.refine())?;
        path = p;
        pol = q;
        stages.push(StageRecord {
            intervals: path.intervals(),
            action: pol.value,
            converged: pol.converged,
            residual: pol.residual,
            path: path.clone(),
        });
    }
    let breakdown = evaluate_action(&path, k, h)?;
    Ok(SolveResult {
        path,
        breakdown,
        converged: pol.converged,
        residual: pol.residual,
        stages,
        starts,
    })
}

/// Straight line plus a random combination of the first three sine modes.
fn perturbed(
    x0: &[f64],
    x1: &[f64],
    delta: f64,
    m: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Path> {
    let d = x0.len();
    let amps: Vec<Vec<f64>> = (0..3)
        .map(|_| {
            (0..d)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let base = Path::straight(x0, x1, delta, m)?;
    let nodes = base
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let s = j as f64 / m as f64;
            (0..d)
                .map(|i| {
                    x[i] + amps
                        .iter()
                        .enumerate()
                        .map(|(q, a)| a[i] * ((q + 1) as f64 * std::f64::consts::PI * s).sin())
                        .sum::<f64>()
                })
                .collect()
        })
        .collect::<Vec<Vec<f64>>>();
    let mut nodes = nodes;
    nodes[0] = x0.to_vec();
    nodes[m] = x1.to_vec();
    Path::new(delta, nodes)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Polished {
    pub value: f64,
    pub residual: f64,
    pub converged: bool,
}

struct Problem<'a> {
    k: &'a PointSet,
    h: Shape,
    cfg: &'a SolverConfig,
}

type FrameCache = HashMap<Vec<usize>, Option<Arc<AffineFrame>>>;

struct Eval {
    value: f64,
    states: Vec<NodeState>,
}

impl Problem<'_> {
    fn eval(&self, nodes: &[Vec<f64>], dt: f64) -> Result<Eval> {
        let states: Vec<NodeState> = nodes
            .iter()
            .map(|x| node_state(self.k, x))
            .collect::<Result<_>>()?;
        let m = nodes.len() - 1;
        let mut kin = 0.0;
        for j in 0..m {
            kin += dist2(&nodes[j], &nodes[j + 1]);
        }
        let mut pot = 0.5 * (self.h.eval(states[0].slope_sq) + self.h.eval(states[m].slope_sq));
        for st in &states[1..m] {
            pot += self.h.eval(st.slope_sq);
        }
        Ok(Eval {
            value: kin / dt + dt * pot,
            states,
        })
    }

    fn frame(&self, class: &[usize], cache: &mut FrameCache) -> Option<Arc<AffineFrame>> {
        if class.len() < 2 {
            return None;
        }
        cache
            .entry(class.to_vec())
            .or_insert_with(|| {
                let pts: Vec<&[f64]> = class.iter().map(|&i| self.k.point(i)).collect();
                affine_frame(&pts).ok().map(Arc::new)
            })
            .clone()
    }

    /// Preconditioned descent on the current pin pattern.
    fn polish(&self, path: &mut Path, cache: &mut FrameCache) -> Result<Polished> {
        let m = path.intervals();
        let d = path.dim();
        let dt = path.dt();
        let delta = path.delta();
        let mut nodes: Vec<Vec<f64>> = path.nodes().to_vec();
        let mut ev = self.eval(&nodes, dt)?;
        let mut alpha = self.cfg.step_init;
        let mut outcome: Polished;

        let mut stagnant = 0usize;
        let mut best_residual = f64::INFINITY;
        let mut iterations = 0usize;
        let mut stop = false;
        loop {
            let pins: Vec<Option<Arc<AffineFrame>>> = ev
                .states
                .iter()
                .map(|s| self.frame(&s.class, cache))
                .collect();
            let mut g = vec![vec![0.0; d]; m + 1];
            let mut residual: f64 = 0.0;
            for j in 1..m {
                let st = &ev.states[j];
                let f = self.h.force_factor(st.slope_sq);
                for i in 0..d {
                    g[j][i] = 2.0 * (2.0 * nodes[j][i] - nodes[j - 1][i] - nodes[j + 1][i]) / dt
                        + dt * f * 2.0 * (nodes[j][i] - st.eta[i]);
                }
                if let Some(fr) = &pins[j] {
                    fr.project_direction_onto_b_in_place(&mut g[j]);
                }
                residual = residual.max(crate::linalg::norm(&g[j]) / dt);
            }
            outcome = Polished {
                value: ev.value,
                residual,
                converged: residual <= self.cfg.grad_tol,
            };
            if residual < 0.999 * best_residual {
                best_residual = residual;
                stagnant = 0;
            } else {
                stagnant += 1;
            }
            if outcome.converged
                || stop
                || stagnant >= STAGNATION_LIMIT
                || iterations >= self.cfg.max_iters
            {
                break;
            }
            iterations += 1;

            let dir = self.precondition(&g, &pins, dt);
            let mut slope = 0.0;
            for j in 1..m {
                slope += crate::linalg::dot(&g[j], &dir[j]);
            }
            if !(slope < 0.0) {
                stop = true;
                continue;
            }

            alpha = (2.0 * alpha).min(1.0);
            // Below this predicted decrease, objective differences are
            // rounding noise and steps are judged by the gradient instead.
            let noise = -slope < 1e-10 * (1.0 + ev.value.abs());
            if noise {
                alpha = 1.0;
            }
            let mut accepted = false;
            while alpha >= MIN_STEP {
                let mut trial = nodes.clone();
                for j in 1..m {
                    for i in 0..d {
                        trial[j][i] += alpha * dir[j][i];
                    }
                    if let Some(fr) = &pins[j] {
                        trial[j] = fr.project_onto_b(&trial[j]);
                    }
                }
                let ev_t = self.eval(&trial, dt)?;
                let same_cells = noise
                    && ev
                        .states
                        .iter()
                        .zip(&ev_t.states)
                        .all(|(a, b)| a.class == b.class);
                let sufficient = ev_t.value
                    <= ev.value + ARMIJO * alpha * slope + ROUNDING_SLACK * ev.value.abs();
                let harmless =
                    same_cells && ev_t.value <= ev.value + 1e-12 * (1.0 + ev.value.abs());
                if sufficient || harmless {
                    nodes = trial;
                    ev = ev_t;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                stop = true;
            }
        }
        *path = Path::new(delta, nodes)?;
        Ok(outcome)
    }

    /// `−Q (QᵀLQ)⁻¹ Qᵀ g` with `L = (2/Δt)·Lap + 2Δt·I`, where `Q` stacks
    /// per node the identity (free) or a basis of `B_H` (pinned).
    fn precondition(
        &self,
        g: &[Vec<f64>],
        pins: &[Option<Arc<AffineFrame>>],
        dt: f64,
    ) -> Vec<Vec<f64>> {
        let m = g.len() - 1;
        let d = g[0].len();
        let bases: Vec<DMatrix<f64>> = (1..m)
            .map(|j| match &pins[j] {
                Some(fr) => DMatrix::from_fn(d, fr.basis_b.len(), |r, c| fr.basis_b[c][r]),
                None => DMatrix::identity(d, d),
            })
            .collect();
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
        let mut dir = vec![vec![0.0; d]; m + 1];
        if !solve_block_tridiagonal(&diag, &upper, &mut rhs) {
            return dir;
        }
        for (i, q) in bases.iter().enumerate() {
            let v = q * &rhs[i];
            dir[i + 1].copy_from_slice(v.as_slice());
        }
        dir
    }

    /// Alternates polishing with the best improving single-node move.
    fn improve(&self, start: Path) -> Result<(Path, Polished)> {
        let mut cache = FrameCache::new();
        let mut path = start;
        let mut pol = self.polish(&mut path, &mut cache)?;
        let rounds = path.intervals().max(8);
        for _ in 0..rounds {
            let candidates = self.moves(&path, &mut cache)?;
            if candidates.is_empty() {
                break;
            }
            let results: Vec<(Path, Polished)> = candidates
                .into_par_iter()
                .filter_map(|mut p| {
                    let mut c = FrameCache::new();
                    self.polish(&mut p, &mut c).ok().map(|q| (p, q))
                })
                .collect();
            let threshold = pol.value - 1e-12 * (1.0 + pol.value.abs());
            let winner = results
                .into_iter()
                .filter(|(_, q)| q.value < threshold)
                .min_by(|a, b| a.1.value.total_cmp(&b.1.value));
            match winner {
                Some((p, q)) => {
                    path = p;
                    pol = q;
                }
                None => break,
            }
        }
        Ok((path, pol))
    }

    /// Single-node snaps onto, and releases from, neighbouring bisectors.
    fn moves(&self, path: &Path, cache: &mut FrameCache) -> Result<Vec<Path>> {
        let m = path.intervals();
        let states: Vec<NodeState> = path
            .nodes()
            .iter()
            .map(|x| node_state(self.k, x))
            .collect::<Result<_>>()?;
        let interior = |j: usize| j >= 1 && j < m;
        let mut out: Vec<Path> = Vec::new();
        let push = |j: usize, x: Vec<f64>, out: &mut Vec<Path>| {
            let mut nodes = path.nodes().to_vec();
            nodes[j] = x;
            if let Ok(p) = Path::new(path.delta(), nodes) {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        };
        let is_subset = |a: &[usize], b: &[usize]| a.iter().all(|i| b.binary_search(i).is_ok());
        for j in 0..m {
            let (ca, cb) = (&states[j].class, &states[j + 1].class);
            if ca == cb {
                continue;
            }
            let nested_up = ca.len() < cb.len() && is_subset(ca, cb);
            let nested_down = cb.len() < ca.len() && is_subset(cb, ca);
            if nested_up || nested_down {
                let (free, pinned) = if nested_up { (j, j + 1) } else { (j + 1, j) };
                let target = &states[pinned].class;
                if interior(free) {
                    if let Some(x) = self.snap(path.node(free), target, cache) {
                        push(free, x, &mut out);
                    }
                }
                if interior(pinned) {
                    let (a, b) = (path.node(pinned), path.node(free));
                    let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
                    if self.k.tied_indices(&x) != *target {
                        push(pinned, x, &mut out);
                    }
                }
            } else {
                let mut union: Vec<usize> = ca.iter().chain(cb).copied().collect();
                union.sort_unstable();
                union.dedup();
                for node in [j, j + 1] {
                    if interior(node) {
                        if let Some(x) = self.snap(path.node(node), &union, cache) {
                            push(node, x, &mut out);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Projection onto `B_H`, kept only if the image lies in the closure of
    /// the cell of `H` (its class contains `H`).
    fn snap(&self, x: &[f64], class: &[usize], cache: &mut FrameCache) -> Option<Vec<f64>> {
        let frame = self.frame(class, cache)?;
        let y = frame.project_onto_b(x);
        let got = self.k.tied_indices(&y);
        class
            .iter()
            .all(|i| got.binary_search(i).is_ok())
            .then_some(y)
    }
}
