use serde::Serialize;

use super::{Path, Shape};
use crate::geometry::{min_norm_point, PointSet};
use crate::linalg::dist2;
use crate::Result;

/// Kinetic and potential parts of the discrete action.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    /// `(|γ_{k+1} − γ_k|²/Δt, Δt·(h_k + h_{k+1})/2)` per interval.
    pub per_interval: Vec<(f64, f64)>,
}

/// Class and `η` of one node.
#[derive(Debug, Clone)]
pub(crate) struct NodeState {
    pub class: Vec<usize>,
    pub eta: Vec<f64>,
    pub slope_sq: f64,
}

pub(crate) fn node_state(k: &PointSet, x: &[f64]) -> Result<NodeState> {
    let class = k.tied_indices(x);
    let eta = if class.len() == 1 {
        k.point(class[0]).to_vec()
    } else {
        let pts: Vec<&[f64]> = class.iter().map(|&i| k.point(i)).collect();
        min_norm_point(&pts, x)?
    };
    Ok(NodeState {
        slope_sq: dist2(x, &eta),
        class,
        eta,
    })
}

pub(crate) fn node_states(k: &PointSet, nodes: &[Vec<f64>]) -> Result<Vec<NodeState>> {
    nodes.iter().map(|x| node_state(k, x)).collect()
}

fn breakdown(path: &Path, states: &[NodeState], h: Shape) -> ActionBreakdown {
    let dt = path.dt();
    let per_interval: Vec<(f64, f64)> = (0..path.intervals())
        .map(|j| {
            let kin = dist2(path.node(j), path.node(j + 1)) / dt;
            let pot = 0.5 * dt * (h.eval(states[j].slope_sq) + h.eval(states[j + 1].slope_sq));
            (kin, pot)
        })
        .collect();
    let kinetic: f64 = per_interval.iter().map(|p| p.0).sum();
    let potential: f64 = per_interval.iter().map(|p| p.1).sum();
    ActionBreakdown {
        kinetic,
        potential,
        total: kinetic + potential,
        per_interval,
    }
}

/// Discrete action: forward-difference kinetic energy plus the trapezoid
/// rule on `h(|∇f_K|²)` at the nodes.
pub fn evaluate_action(path: &Path, k: &PointSet, h: Shape) -> Result<ActionBreakdown> {
    k.check_dim(path.start())?;
    h.validate()?;
    let states = node_states(k, path.nodes())?;
    Ok(breakdown(path, &states, h))
}

/// Gradient of the discrete action with respect to every node, with `η`
/// frozen at its value at the node. Entries for the two endpoints are zero.
pub fn action_gradient(path: &Path, k: &PointSet, h: Shape) -> Result<Vec<Vec<f64>>> {
    k.check_dim(path.start())?;
    h.validate()?;
    let states = node_states(k, path.nodes())?;
    let dt = path.dt();
    let m = path.intervals();
    let d = path.dim();
    let mut out = vec![vec![0.0; d]; m + 1];
    for j in 1..m {
        let (a, x, b) = (path.node(j - 1), path.node(j), path.node(j + 1));
        let st = &states[j];
        let f = h.force_factor(st.slope_sq);
        for i in 0..d {
            out[j][i] = 2.0 * (2.0 * x[i] - a[i] - b[i]) / dt + dt * f * 2.0 * (x[i] - st.eta[i]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> PointSet {
        PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn constant_path_at_bisector_has_zero_action() {
        let p = Path::straight(&[0.0], &[0.0], 1.0, 10).unwrap();
        let b = evaluate_action(&p, &pair(), Shape::Identity).unwrap();
        assert_eq!(b.total, 0.0);
    }

    #[test]
    fn linear_crossing_converges() {
        let mut prev_err = f64::INFINITY;
        for m in [64, 128, 256, 512] {
            let p = Path::straight(&[-1.0], &[1.0], 1.0, m).unwrap();
            let b = evaluate_action(&p, &pair(), Shape::Identity).unwrap();
            assert!((b.kinetic - 4.0).abs() < 1e-12);
            let err = (b.total - (4.0 + 1.0 / 3.0)).abs();
            assert!(err < 2.0 / m as f64, "m={m} err={err}");
            assert!(err <= prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn stationary_at_a_point() {
        let k = pair();
        let h = Shape::Affine { a: 1.0, b: 0.25 };
        let p = Path::straight(&[1.0], &[1.0], 2.0, 8).unwrap();
        let b = evaluate_action(&p, &k, h).unwrap();
        assert!((b.total - 2.0 * 0.25).abs() < 1e-12);
        let g = action_gradient(&p, &k, h).unwrap();
        assert!(g.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let k = PointSet::new(vec![vec![0.0, 0.0], vec![3.0, 0.5]]).unwrap();
        for h in [Shape::Identity, Shape::Power { p: 2.0 }] {
            let nodes: Vec<Vec<f64>> = (0..=10)
                .map(|j| {
                    let t = j as f64 / 10.0;
                    vec![0.2 + 0.5 * t, 0.1 * (3.0 * t).sin()]
                })
                .collect();
            let p = Path::new(1.0, nodes.clone()).unwrap();
            let g = action_gradient(&p, &k, h).unwrap();
            let e = 1e-6;
            for j in 1..10 {
                for i in 0..2 {
                    let mut plus = nodes.clone();
                    plus[j][i] += e;
                    let mut minus = nodes.clone();
                    minus[j][i] -= e;
                    let fp = evaluate_action(&Path::new(1.0, plus).unwrap(), &k, h)
                        .unwrap()
                        .total;
                    let fm = evaluate_action(&Path::new(1.0, minus).unwrap(), &k, h)
                        .unwrap()
                        .total;
                    let fd = (fp - fm) / (2.0 * e);
                    assert!(
                        (fd - g[j][i]).abs() <= 1e-5 * g[j][i].abs().max(1.0),
                        "{fd} vs {}",
                        g[j][i]
                    );
                }
            }
        }
    }
}
