//! Diagnostics on computed paths: discrete energy, shock events and their
//! jump identities, second-difference regularity and projected momentum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::action::{node_state, Path, Shape};
use crate::geometry::{affine_frame, OptClass, PointSet};
use crate::linalg::{dist, dist2, dot, norm, norm2, sub};
use crate::potential::ETA_TOLERANCE;
use crate::{Error, Result};

/// Second differences may exceed the bound by this many `Δt`.
pub const SECOND_DIFF_SLACK: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockKind {
    Degenerate,
    Nondegenerate,
    EffectiveLeft,
    EffectiveRight,
}

impl ShockKind {
    pub fn is_effective(self) -> bool {
        matches!(self, ShockKind::EffectiveLeft | ShockKind::EffectiveRight)
    }

    pub fn is_nondegenerate(self) -> bool {
        self != ShockKind::Degenerate
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShockEvent {
    /// First node past the class run preceding the event.
    pub node_index: usize,
    /// Times of the last node before and the first node after the event.
    pub time_interval: (f64, f64),
    /// Point estimate of the shock time.
    pub time: f64,
    pub kind: ShockKind,
    pub class_before: OptClass,
    pub class_after: OptClass,
    pub eta_before: Vec<f64>,
    pub eta_after: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub jump_sq: f64,
    /// Node value used as `γ(t)`.
    pub position: Vec<f64>,
    /// Orthonormal basis of `B` for the larger class (nested events) or the
    /// union of both classes; `None` when that class has no equidistance
    /// locus.
    pub momentum_basis: Option<Vec<Vec<f64>>>,
    /// Node range `[first, last]` covered by the transition.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyProfile {
    pub values: Vec<f64>,
    pub constant: f64,
    pub deviations: Vec<f64>,
}

/// Per-interval discrete energy `|Δγ/Δt|² − (h_k + h_{k+1})/2` and its
/// median.
pub fn energy_profile(path: &Path, k: &PointSet, h: Shape) -> Result<EnergyProfile> {
    if path.intervals() < 4 {
        return Err(Error::InvalidArgument("energy profile needs M ≥ 4".into()));
    }
    k.check_dim(path.start())?;
    let dt = path.dt();
    let hv: Vec<f64> = path
        .nodes()
        .iter()
        .map(|x| node_state(k, x).map(|s| h.eval(s.slope_sq)))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = (0..path.intervals())
        .map(|j| dist2(path.node(j), path.node(j + 1)) / (dt * dt) - 0.5 * (hv[j] + hv[j + 1]))
        .collect();
    let constant = median(&values);
    let deviations = values.iter().map(|v| v - constant).collect();
    Ok(EnergyProfile {
        values,
        constant,
        deviations,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

struct Run {
    start: usize,
    end: usize,
    class: Vec<usize>,
}

impl Run {
    fn len(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Detects changes of optimality class along the path.
///
/// Maximal runs of nodes sharing a class are formed; consecutive changes
/// separated only by runs shorter than `window` nodes are merged into one
/// event. An event is nondegenerate when `η` moves by more than `ε_η`
/// anywhere across it. It is effective when it is a single change between
/// strictly nested classes with distinct `η`, flanked by runs of at least
/// `window` nodes (or by the path ends).
pub fn detect_shocks(path: &Path, k: &PointSet, window: usize) -> Result<Vec<ShockEvent>> {
    if window < 2 {
        return Err(Error::InvalidArgument("window must be at least 2".into()));
    }
    if window > path.intervals() {
        return Err(Error::InvalidArgument(
            "window exceeds the path length".into(),
        ));
    }
    k.check_dim(path.start())?;
    let states = path
        .nodes()
        .iter()
        .map(|x| node_state(k, x))
        .collect::<Result<Vec<_>>>()?;
    let mut runs: Vec<Run> = Vec::new();
    for (j, st) in states.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.class == st.class => r.end = j,
            _ => runs.push(Run {
                start: j,
                end: j,
                class: st.class.clone(),
            }),
        }
    }

    let mut events = Vec::new();
    let mut a = 0;
    while a + 1 < runs.len() {
        let mut b = a + 1;
        while b + 1 < runs.len() && runs[b].len() < window {
            b += 1;
        }
        let (before, after) = (&runs[a], &runs[b]);
        let span = (before.end, after.start);
        let eta_before = states[before.end].eta.clone();
        let eta_after = states[after.start].eta.clone();
        let nondegenerate =
            (span.0..=span.1).any(|j| dist(&states[j].eta, &eta_before) > ETA_TOLERANCE);

        let cb = OptClass {
            indices: before.class.clone(),
            witness: path.node(span.0).to_vec(),
        };
        let ca = OptClass {
            indices: after.class.clone(),
            witness: path.node(span.1).to_vec(),
        };
        let flanked =
            (before.len() >= window || a == 0) && (after.len() >= window || b + 1 == runs.len());
        let kind = if !nondegenerate {
            ShockKind::Degenerate
        } else if b == a + 1 && flanked && cb.is_strict_subset_of(&ca) {
            ShockKind::EffectiveLeft
        } else if b == a + 1 && flanked && ca.is_strict_subset_of(&cb) {
            ShockKind::EffectiveRight
        } else {
            ShockKind::Nondegenerate
        };

        let (t_lo, t_hi) = (path.time(span.0), path.time(span.1));
        let (time, pos_node) = match kind {
            ShockKind::EffectiveLeft => (t_hi, span.1),
            ShockKind::EffectiveRight => (t_lo, span.0),
            _ => (0.5 * (t_lo + t_hi), span.0),
        };
        let fit = window.max(3) + 1;
        let v_minus = run_velocity(path, before, fit, time, true, span.1);
        let v_plus = run_velocity(path, after, fit, time, false, span.0);
        let jump_sq = dist2(&v_minus, &v_plus);

        let basis_class: Vec<usize> = if cb.is_strict_subset_of(&ca) {
            ca.indices.clone()
        } else if ca.is_strict_subset_of(&cb) {
            cb.indices.clone()
        } else {
            cb.union(&ca)
        };
        let pts: Vec<&[f64]> = basis_class.iter().map(|&i| k.point(i)).collect();
        let momentum_basis = affine_frame(&pts).ok().map(|f| f.basis_b);

        events.push(ShockEvent {
            node_index: before.end + 1,
            time_interval: (t_lo, t_hi),
            time,
            kind,
            class_before: cb,
            class_after: ca,
            eta_before,
            eta_after,
            v_minus,
            v_plus,
            jump_sq,
            position: path.node(pos_node).to_vec(),
            momentum_basis,
            span,
        });
        a = b;
    }
    Ok(events)
}

/// One-sided velocity of a run at time `t`: derivative of the least-squares
/// quadratic through the run's `fit` nodes nearest the event. Runs of one
/// node fall back to the difference quotient towards `across`.
fn run_velocity(
    path: &Path,
    run: &Run,
    fit: usize,
    t: f64,
    before: bool,
    across: usize,
) -> Vec<f64> {
    let d = path.dim();
    let nodes: Vec<usize> = if before {
        (run.end + 1 - run.len().min(fit)..=run.end).collect()
    } else {
        (run.start..run.start + run.len().min(fit)).collect()
    };
    if nodes.len() < 2 {
        let j = nodes[0];
        let (a, b) = if before { (j, across) } else { (across, j) };
        let (a, b) = (a.min(b), a.max(b));
        if a == b {
            return vec![0.0; d];
        }
        return sub(path.node(b), path.node(a))
            .iter()
            .map(|c| c / (path.time(b) - path.time(a)))
            .collect();
    }
    let degree = if nodes.len() >= 3 { 2 } else { 1 };
    let dt = path.dt();
    let design = DMatrix::from_fn(nodes.len(), degree + 1, |r, c| {
        ((path.time(nodes[r]) - t) / dt).powi(c as i32)
    });
    let svd = design.clone().svd(true, true);
    (0..d)
        .map(|i| {
            let y = DVector::from_fn(nodes.len(), |r, _| path.node(nodes[r])[i]);
            svd.solve(&y, 1e-12).map(|coef| coef[1] / dt).unwrap_or(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpCheck {
    /// `|jump² − (h(|γ(t)−η_H|²) − h(|γ(t)−η_H̄|²))|` with `H ⊊ H̄`.
    pub residual: f64,
    /// Distance from the velocity on the larger-class side to the
    /// projection onto `B_H̄` of the velocity on the other side.
    pub projection_residual: f64,
    /// `| |v_H|² − |v_H̄|² − jump² |`
    pub decomposition_residual: f64,
}

/// Checks the velocity-jump identities at an effective shock.
pub fn jump_residual(event: &ShockEvent, h: Shape) -> Result<JumpCheck> {
    let (v_small, v_big, eta_small, eta_big) = match event.kind {
        ShockKind::EffectiveLeft => (
            &event.v_minus,
            &event.v_plus,
            &event.eta_before,
            &event.eta_after,
        ),
        ShockKind::EffectiveRight => (
            &event.v_plus,
            &event.v_minus,
            &event.eta_after,
            &event.eta_before,
        ),
        _ => return Err(Error::NotEffective),
    };
    let x = &event.position;
    let expected = h.eval(dist2(x, eta_small)) - h.eval(dist2(x, eta_big));
    let projected = match &event.momentum_basis {
        Some(basis) => project(v_small, basis),
        None => vec![0.0; v_small.len()],
    };
    Ok(JumpCheck {
        residual: (event.jump_sq - expected).abs(),
        projection_residual: dist(v_big, &projected),
        decomposition_residual: (norm2(v_small) - norm2(v_big) - event.jump_sq).abs(),
    })
}

fn project(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for b in basis {
        let c = dot(v, b);
        for (o, bc) in out.iter_mut().zip(b) {
            *o += c * bc;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ShockCounts {
    pub total: usize,
    pub degenerate: usize,
    /// Includes the effective ones.
    pub nondegenerate: usize,
    pub effective_left: usize,
    pub effective_right: usize,
}

impl ShockCounts {
    pub fn from_events(events: &[ShockEvent]) -> Self {
        let mut c = Self::default();
        for e in events {
            c.total += 1;
            match e.kind {
                ShockKind::Degenerate => c.degenerate += 1,
                ShockKind::Nondegenerate => c.nondegenerate += 1,
                ShockKind::EffectiveLeft => {
                    c.nondegenerate += 1;
                    c.effective_left += 1
                }
                ShockKind::EffectiveRight => {
                    c.nondegenerate += 1;
                    c.effective_right += 1
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDiffViolation {
    pub node: usize,
    pub estimate: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub energy_values: Vec<f64>,
    pub energy_constant: f64,
    pub energy_std_away_from_shocks: f64,
    pub energy_intervals_checked: usize,
    pub second_diff_violations: Vec<SecondDiffViolation>,
    /// Largest `estimate − bound` over checked nodes (may be negative).
    pub max_second_diff_excess: f64,
    pub second_diff_nodes_checked: usize,
    pub shock_count_by_kind: ShockCounts,
    /// `|P_B v₋ − P_B v₊|` per nondegenerate event with a momentum basis.
    pub momentum_residuals: Vec<f64>,
    pub events: Vec<ShockEvent>,
}

fn node_distance(j: usize, span: (usize, usize)) -> usize {
    if j < span.0 {
        span.0 - j
    } else {
        j.saturating_sub(span.1)
    }
}

/// Energy constancy, the second-difference bound
/// `|γ̈| ≤ h′(|γ−η|²)|γ−η| + 20Δt` at nodes at least two nodes from every
/// nondegenerate shock, shock counts and projected-momentum continuity.
pub fn regularity_report(
    path: &Path,
    k: &PointSet,
    h: Shape,
    window: usize,
) -> Result<RegularityReport> {
    let energy = energy_profile(path, k, h)?;
    let events = detect_shocks(path, k, window)?;
    let m = path.intervals();
    let dt = path.dt();

    let far = |j: usize, nondegenerate_only: bool| {
        events
            .iter()
            .filter(|e| !nondegenerate_only || e.kind.is_nondegenerate())
            .all(|e| node_distance(j, e.span) >= 2)
    };
    let kept: Vec<f64> = (0..m)
        .filter(|&j| far(j, false) && far(j + 1, false))
        .map(|j| energy.values[j])
        .collect();
    let std = if kept.is_empty() {
        0.0
    } else {
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        (kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / kept.len() as f64).sqrt()
    };

    let mut violations = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    let mut checked = 0;
    for j in 1..m {
        if !far(j, true) {
            continue;
        }
        checked += 1;
        let (a, x, b) = (path.node(j - 1), path.node(j), path.node(j + 1));
        let acc: Vec<f64> = (0..x.len())
            .map(|i| (a[i] - 2.0 * x[i] + b[i]) / (dt * dt))
            .collect();
        let estimate = norm(&acc);
        let st = node_state(k, x)?;
        let r = st.slope_sq.sqrt();
        let bound = if r == 0.0 {
            0.0
        } else {
            h.deriv(st.slope_sq) * r
        };
        let excess = estimate - bound;
        max_excess = max_excess.max(excess);
        if excess > SECOND_DIFF_SLACK * dt {
            violations.push(SecondDiffViolation {
                node: j,
                estimate,
                bound,
            });
        }
    }

    let counts = ShockCounts::from_events(&events);
    let momentum_residuals = events
        .iter()
        .filter(|e| e.kind.is_nondegenerate())
        .filter_map(|e| {
            e.momentum_basis
                .as_ref()
                .map(|b| dist(&project(&e.v_minus, b), &project(&e.v_plus, b)))
        })
        .collect();

    Ok(RegularityReport {
        energy_values: energy.values,
        energy_constant: energy.constant,
        energy_std_away_from_shocks: std,
        energy_intervals_checked: kept.len(),
        second_diff_violations: violations,
        max_second_diff_excess: if checked > 0 { max_excess } else { 0.0 },
        second_diff_nodes_checked: checked,
        shock_count_by_kind: counts,
        momentum_residuals,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> PointSet {
        PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn constant_path_energy() {
        let h = Shape::Affine { a: 1.0, b: 0.5 };
        let p = Path::straight(&[1.0], &[1.0], 1.0, 8).unwrap();
        let e = energy_profile(&p, &pair(), h).unwrap();
        assert!(e.values.iter().all(|&v| (v + 0.5).abs() < 1e-15));
        assert!(
            energy_profile(&Path::straight(&[1.0], &[1.0], 1.0, 3).unwrap(), &pair(), h).is_err()
        );
    }

    #[test]
    fn single_cell_path_has_no_events() {
        let p = Path::straight(&[0.2], &[0.9], 1.0, 16).unwrap();
        assert!(detect_shocks(&p, &pair(), 3).unwrap().is_empty());
        assert!(detect_shocks(&p, &pair(), 1).is_err());
        assert!(detect_shocks(&p, &pair(), 17).is_err());
    }

    #[test]
    fn synthetic_waiting_path() {
        // Arrive at 0 with unit speed, wait, leave with unit speed.
        let m = 100;
        let nodes: Vec<Vec<f64>> = (0..=m)
            .map(|j| {
                let t = j as f64 / m as f64;
                vec![if t < 0.3 {
                    t - 0.3
                } else if t > 0.7 {
                    t - 0.7
                } else {
                    0.0
                }]
            })
            .collect();
        let p = Path::new(1.0, nodes).unwrap();
        let ev = detect_shocks(&p, &pair(), 3).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].kind, ShockKind::EffectiveLeft);
        assert_eq!(ev[1].kind, ShockKind::EffectiveRight);
        assert!((ev[0].time - 0.3).abs() < 1e-12);
        assert!((ev[0].jump_sq - 1.0).abs() < 1e-9);
        let j = jump_residual(&ev[0], Shape::Identity).unwrap();
        assert!(
            j.residual < 1e-9 && j.projection_residual < 1e-9 && j.decomposition_residual < 1e-9
        );
    }

    #[test]
    fn crossing_is_not_effective() {
        let p = Path::straight(&[-1.0], &[1.0], 1.0, 64).unwrap();
        let ev = detect_shocks(&p, &pair(), 3).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, ShockKind::Nondegenerate);
        assert!(matches!(
            jump_residual(&ev[0], Shape::Identity),
            Err(Error::NotEffective)
        ));
    }
}
