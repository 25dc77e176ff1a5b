//! The scalar field layer: `f_K`, `g_K`, the extended gradient, potential
//! zones and balancedness.

use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{affine_frame, min_norm_point, opt_class, OptClass, PointSet};
use crate::linalg::{dist, dist2, dot, norm, norm2};
use crate::{Error, Result};

/// Absolute tolerance under which two potential values are identified.
pub const ETA_TOLERANCE: f64 = 1e-7;

/// Membership tolerance for `η ∈ conv(opt(x))`.
const P_ETA_TOLERANCE: f64 = 1e-8;

/// `f_K(x) = −min_i |x − p_i|² / 2`
pub fn f_eval(x: &[f64], k: &PointSet) -> Result<f64> {
    k.check_dim(x)?;
    Ok(-0.5 * k.min_sq_dist(x))
}

/// `g_K(x) = f_K(x) + |x|²/2`, evaluated through its convex form
/// `max_i (x·p_i − |p_i|²/2)`.
pub fn g_eval(x: &[f64], k: &PointSet) -> Result<f64> {
    k.check_dim(x)?;
    Ok(k.points()
        .iter()
        .map(|p| dot(x, p) - 0.5 * norm2(p))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Optimality class, projection `η(x)` of `x` onto the hull of the class,
/// and the extended gradient `η(x) − x`.
#[derive(Debug, Clone, Serialize)]
pub struct GradientInfo {
    pub x: Vec<f64>,
    pub class: OptClass,
    pub eta: Vec<f64>,
    pub grad: Vec<f64>,
    pub f_value: f64,
    pub slope_sq: f64,
}

pub fn extended_gradient(x: &[f64], k: &PointSet) -> Result<GradientInfo> {
    let class = opt_class(x, k)?;
    let eta = if class.len() == 1 {
        k.point(class.indices[0]).to_vec()
    } else {
        min_norm_point(&k.class_points(&class), x)?
    };
    let grad: Vec<f64> = eta.iter().zip(x).map(|(e, xi)| e - xi).collect();
    let slope_sq = norm2(&grad);
    Ok(GradientInfo {
        x: x.to_vec(),
        f_value: -0.5 * k.min_sq_dist(x),
        class,
        eta,
        grad,
        slope_sq,
    })
}

/// Sampled lower bound on the slope
/// `sup_{y≠x} [f(x) − f(y) − |x−y|²/2]⁺ / |x − y|`.
///
/// Candidates `y` lie on spheres of geometrically shrinking radii around
/// `x` along random directions, the coordinate axes and the rays pointing
/// away from every `p_i`; the points `p_i` and `η(x)` are added as well.
pub fn slope_sup_oracle(x: &[f64], k: &PointSet, sample_count: usize, seed: u64) -> Result<f64> {
    if sample_count < 100 {
        return Err(Error::InvalidArgument(
            "sample_count must be at least 100".into(),
        ));
    }
    k.check_dim(x)?;
    let d = k.dim();
    let fx = -0.5 * k.min_sq_dist(x);
    let ratio = |y: &[f64]| -> f64 {
        let r = dist(x, y);
        if r == 0.0 {
            return 0.0;
        }
        let fy = -0.5 * k.min_sq_dist(y);
        ((fx - fy - 0.5 * r * r) / r).max(0.0)
    };

    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            directions.push(e);
        }
    }
    for p in k.points() {
        let away: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        let len = norm(&away);
        if len > 0.0 {
            directions.push(away.iter().map(|c| c / len).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..sample_count {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 0.0 {
            directions.push(v.iter().map(|c| c / len).collect());
        }
    }

    let r_max = 2.0 * (1.0 + k.min_sq_dist(x).sqrt());
    let radii: Vec<f64> = (0..13)
        .map(|j| r_max * 10f64.powf(-0.5 * j as f64))
        .collect();
    let mut best = 0.0f64;
    let mut y = vec![0.0; d];
    for u in &directions {
        for &r in &radii {
            for i in 0..d {
                y[i] = x[i] + r * u[i];
            }
            best = best.max(ratio(&y));
        }
    }
    for p in k.points() {
        best = best.max(ratio(p));
    }
    let info = extended_gradient(x, k)?;
    best = best.max(ratio(&info.eta));
    Ok(best)
}

/// `x ∈ P_η`, i.e. `η ∈ ∂g_K(x) = conv(opt_K(x))`.
pub fn in_p_eta(x: &[f64], eta: &[f64], k: &PointSet) -> Result<bool> {
    k.check_dim(eta)?;
    let class = opt_class(x, k)?;
    let proj = min_norm_point(&k.class_points(&class), eta)?;
    Ok(dist(&proj, eta) <= P_ETA_TOLERANCE)
}

/// One witnessed Voronoi cell and the index of its potential value.
#[derive(Debug, Clone, Serialize)]
pub struct ZoneEntry {
    pub class: Vec<usize>,
    pub zone: usize,
}

/// Potential values witnessed by probing, with `β` and the balancedness
/// verdict. The verdict holds on witnessed cells only.
#[derive(Debug, Clone, Serialize)]
pub struct ZoneTable {
    pub etas: Vec<Vec<f64>>,
    /// Minimal squared distance between distinct witnessed values; `0` when
    /// fewer than two values were seen.
    pub beta: f64,
    pub cell_to_zone: Vec<ZoneEntry>,
    pub balanced: bool,
    /// Two distinct classes sharing one potential value, when unbalanced.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
    pub witnessed_cells: usize,
    pub candidates: usize,
}

impl ZoneTable {
    pub fn zone_of(&self, class: &[usize]) -> Option<usize> {
        self.cell_to_zone
            .iter()
            .find(|e| e.class == class)
            .map(|e| e.zone)
    }
}

/// Discovers potential zones by evaluating `η` on uniform probes in the box
/// and on structured candidates: pairwise midpoints, circumcenters of
/// triples, the points `p_H` of every witnessed class, and small offsets
/// from these along `B_H`.
pub fn zone_table(
    k: &PointSet,
    probe_box: (&[f64], &[f64]),
    probe_count: usize,
    seed: u64,
) -> Result<ZoneTable> {
    let (lo, hi) = probe_box;
    k.check_dim(lo)?;
    k.check_dim(hi)?;
    let d = k.dim();
    if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::InvalidArgument("probe box has lo > hi".into()));
    }
    let inside = |x: &[f64]| x.iter().enumerate().all(|(i, &c)| c >= lo[i] && c <= hi[i]);
    if let Some(p) = k.points().iter().find(|p| !inside(p)) {
        return Err(Error::InvalidArgument(format!(
            "probe box does not contain the point {p:?}"
        )));
    }

    let spacing = min_spacing(k);
    let offsets = [0.05 * spacing, 0.25 * spacing];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<Vec<f64>> = (0..probe_count)
        .map(|_| {
            (0..d)
                .map(|i| {
                    if hi[i] > lo[i] {
                        rng.gen_range(lo[i]..hi[i])
                    } else {
                        lo[i]
                    }
                })
                .collect()
        })
        .collect();
    for (i, j) in candidate_pairs(k) {
        let pts = [k.point(i), k.point(j)];
        push_frame_candidates(&pts, &offsets, &mut candidates);
    }
    if d >= 2 {
        for t in candidate_triples(k) {
            let pts = [k.point(t[0]), k.point(t[1]), k.point(t[2])];
            push_frame_candidates(&pts, &offsets, &mut candidates);
        }
    }
    candidates.retain(|x| inside(x));

    let mut cells: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let mut evaluated = 0usize;
    evaluate_into(k, &candidates, &mut cells)?;
    evaluated += candidates.len();

    let mut second: Vec<Vec<f64>> = Vec::new();
    for class in cells.keys() {
        if class.len() > 1 {
            let pts: Vec<&[f64]> = class.iter().map(|&i| k.point(i)).collect();
            push_frame_candidates(&pts, &offsets, &mut second);
        }
    }
    second.retain(|x| inside(x));
    evaluate_into(k, &second, &mut cells)?;
    evaluated += second.len();

    let mut etas: Vec<Vec<f64>> = Vec::new();
    let mut cell_to_zone = Vec::with_capacity(cells.len());
    let mut witness = None;
    let mut first_class_of_zone: Vec<Vec<usize>> = Vec::new();
    for (class, eta) in &cells {
        let zone = match etas.iter().position(|e| dist(e, eta) <= ETA_TOLERANCE) {
            Some(z) => {
                if witness.is_none() {
                    witness = Some((first_class_of_zone[z].clone(), class.clone()));
                }
                z
            }
            None => {
                etas.push(eta.clone());
                first_class_of_zone.push(class.clone());
                etas.len() - 1
            }
        };
        cell_to_zone.push(ZoneEntry {
            class: class.clone(),
            zone,
        });
    }
    let beta = etas
        .iter()
        .tuple_combinations()
        .map(|(a, b)| dist2(a, b))
        .fold(f64::INFINITY, f64::min);
    Ok(ZoneTable {
        beta: if beta.is_finite() { beta } else { 0.0 },
        balanced: witness.is_none(),
        witnessed_cells: cells.len(),
        etas,
        cell_to_zone,
        witness,
        candidates: evaluated,
    })
}

fn evaluate_into(
    k: &PointSet,
    xs: &[Vec<f64>],
    cells: &mut BTreeMap<Vec<usize>, Vec<f64>>,
) -> Result<()> {
    let infos: Vec<(Vec<usize>, Vec<f64>)> = xs
        .par_iter()
        .map(|x| extended_gradient(x, k).map(|g| (g.class.indices, g.eta)))
        .collect::<Result<_>>()?;
    for (class, eta) in infos {
        cells.entry(class).or_insert(eta);
    }
    Ok(())
}

/// `p_H` of the collection and `p_H ± s·b` for each `B_H` basis vector.
fn push_frame_candidates(pts: &[&[f64]], offsets: &[f64], out: &mut Vec<Vec<f64>>) {
    let Ok(frame) = affine_frame(pts) else {
        return;
    };
    out.push(frame.p_h.clone());
    if frame.basis_b.len() == frame.dim() {
        return;
    }
    for b in &frame.basis_b {
        for &s in offsets {
            for sign in [1.0, -1.0] {
                out.push(
                    frame
                        .p_h
                        .iter()
                        .zip(b)
                        .map(|(p, c)| p + sign * s * c)
                        .collect(),
                );
            }
        }
    }
}

fn min_spacing(k: &PointSet) -> f64 {
    let n = k.len();
    if n < 2 {
        return 1.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.min(dist(k.point(i), k.point(j)));
        }
    }
    best
}

const ALL_PAIRS_LIMIT: usize = 200;
const ALL_TRIPLES_LIMIT: usize = 30;

fn neighbours(k: &PointSet, i: usize, count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..k.len()).filter(|&j| j != i).collect();
    order.sort_by(|&a, &b| {
        dist2(k.point(i), k.point(a))
            .total_cmp(&dist2(k.point(i), k.point(b)))
            .then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

fn candidate_pairs(k: &PointSet) -> Vec<(usize, usize)> {
    let n = k.len();
    if n <= ALL_PAIRS_LIMIT {
        return (0..n).tuple_combinations().collect();
    }
    let count = 2 * k.dim() + 2;
    let mut out: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| {
            neighbours(k, i, count)
                .into_iter()
                .map(move |j| (i.min(j), i.max(j)))
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn candidate_triples(k: &PointSet) -> Vec<[usize; 3]> {
    let n = k.len();
    if n <= ALL_TRIPLES_LIMIT {
        return (0..n)
            .tuple_combinations()
            .map(|(a, b, c)| [a, b, c])
            .collect();
    }
    let count = 2 * k.dim() + 2;
    let mut out: Vec<[usize; 3]> = Vec::new();
    for i in 0..n {
        for pair in neighbours(k, i, count).into_iter().combinations(2) {
            let mut t = [i, pair[0], pair[1]];
            t.sort_unstable();
            out.push(t);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
