use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::node_state;
use super::{Path, Shape};
use crate::geometry::PointSet;
use crate::{Error, Result};

/// Largest number of (time slice, grid point) pairs the oracle accepts.
pub const NODE_BUDGET: usize = 10_000_000;

/// Box, spacing and time slices of the layered graph. Grid coordinates are
/// the integer multiples of `resolution` inside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub resolution: f64,
    pub slices: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DpResult {
    /// Optimal grid path with its endpoints replaced by the exact boundary
    /// conditions.
    pub path: Path,
    /// Cost of the optimal grid path (snapped endpoints).
    pub cost: f64,
}

struct Grid {
    dim: usize,
    first: Vec<i64>,
    counts: Vec<usize>,
    strides: Vec<usize>,
    res: f64,
}

impl Grid {
    fn len(&self) -> usize {
        self.counts.iter().product()
    }

    fn coords(&self, mut idx: usize) -> [i64; 3] {
        let mut c = [0; 3];
        for i in (0..self.dim).rev() {
            c[i] = self.first[i] + (idx / self.strides[i]) as i64;
            idx %= self.strides[i];
        }
        c
    }

    fn index(&self, c: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..self.dim {
            let o = c[i] - self.first[i];
            if o < 0 || o as usize >= self.counts[i] {
                return None;
            }
            idx += o as usize * self.strides[i];
        }
        Some(idx)
    }

    fn point(&self, c: &[i64]) -> Vec<f64> {
        c[..self.dim].iter().map(|&v| v as f64 * self.res).collect()
    }

    fn snap(&self, x: &[f64]) -> [i64; 3] {
        let mut c = [0; 3];
        for i in 0..self.dim {
            let v = (x[i] / self.res).round() as i64;
            c[i] = v.clamp(self.first[i], self.first[i] + self.counts[i] as i64 - 1);
        }
        c
    }
}

/// Exact minimizer of the discrete action over grid-valued paths, by
/// dynamic programming over time layers.
///
/// Edges whose kinetic cost alone exceeds the cost of the snapped straight
/// line are pruned; they cannot belong to an optimal path.
pub fn dp_oracle(
    x0: &[f64],
    xdelta: &[f64],
    delta: f64,
    k: &PointSet,
    h: Shape,
    grid: &GridSpec,
) -> Result<DpResult> {
    let d = k.dim();
    k.check_dim(x0)?;
    k.check_dim(xdelta)?;
    k.check_dim(&grid.lo)?;
    k.check_dim(&grid.hi)?;
    h.validate()?;
    if d > 3 {
        return Err(Error::InvalidArgument(
            "the grid oracle supports d ≤ 3".into(),
        ));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    if !(grid.resolution.is_finite() && grid.resolution > 0.0) || grid.slices < 2 {
        return Err(Error::InvalidArgument(
            "grid needs a positive resolution and at least 2 slices".into(),
        ));
    }
    let mut first = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for i in 0..d {
        let a = (grid.lo[i] / grid.resolution - 1e-9).ceil();
        let b = (grid.hi[i] / grid.resolution + 1e-9).floor();
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(Error::InvalidArgument("empty grid box".into()));
        }
        let n = b - a + 1.0;
        if n > NODE_BUDGET as f64 {
            return Err(Error::GridTooLarge {
                nodes: usize::MAX,
                budget: NODE_BUDGET,
            });
        }
        first.push(a as i64);
        counts.push(n as usize);
    }
    let mut strides = vec![1usize; d];
    for i in 1..d {
        strides[i] = strides[i - 1] * counts[i - 1];
    }
    let g = Grid {
        dim: d,
        first,
        counts,
        strides,
        res: grid.resolution,
    };
    let total = g.len().saturating_mul(grid.slices + 1);
    if total > NODE_BUDGET {
        return Err(Error::GridTooLarge {
            nodes: total,
            budget: NODE_BUDGET,
        });
    }

    let t = grid.slices;
    let dt = delta / t as f64;
    let n = g.len();
    let pot: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|idx| node_state(k, &g.point(&g.coords(idx))).map(|s| h.eval(s.slope_sq)))
        .collect::<Result<_>>()?;
    let start = g.index(&g.snap(x0)).expect("snapped inside grid");
    let end = g.index(&g.snap(xdelta)).expect("snapped inside grid");
    let coords: Vec<[i64; 3]> = (0..n).map(|i| g.coords(i)).collect();
    let edge = |a: usize, b: usize| -> f64 {
        let kin: f64 = coords[a]
            .iter()
            .zip(&coords[b])
            .map(|(p, q)| ((p - q) as f64 * g.res).powi(2))
            .sum();
        kin / dt + 0.5 * dt * (pot[a] + pot[b])
    };

    let straight: Vec<usize> = (0..=t)
        .map(|j| {
            let s = j as f64 / t as f64;
            let x: Vec<f64> = (0..d)
                .map(|i| {
                    let a = g.point(&coords[start])[i];
                    let b = g.point(&coords[end])[i];
                    a + s * (b - a)
                })
                .collect();
            g.index(&g.snap(&x)).expect("snapped inside grid")
        })
        .collect();
    let upper: f64 = straight.windows(2).map(|w| edge(w[0], w[1])).sum();
    let reach = ((upper * dt).sqrt() / g.res).floor() as i64;
    let mut offsets: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..d {
        offsets = offsets
            .into_iter()
            .flat_map(|o| {
                (-reach..=reach).map(move |v| {
                    let mut o = o.clone();
                    o.push(v);
                    o
                })
            })
            .collect();
    }
    offsets.retain(|o| {
        (o.iter().map(|v| v * v).sum::<i64>() as f64) * g.res * g.res / dt <= upper + 1e-12
    });

    let mut cost = vec![f64::INFINITY; n];
    cost[start] = 0.0;
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(t);
    for _ in 0..t {
        let prev = &cost;
        let next: Vec<(f64, u32)> = (0..n)
            .into_par_iter()
            .map(|b| {
                let mut best = (f64::INFINITY, u32::MAX);
                let cb = &coords[b];
                for o in &offsets {
                    let mut ca = [0i64; 3];
                    for i in 0..d {
                        ca[i] = cb[i] - o[i];
                    }
                    let Some(a) = g.index(&ca) else { continue };
                    if !prev[a].is_finite() {
                        continue;
                    }
                    let c = prev[a] + edge(a, b);
                    if c < best.0 {
                        best = (c, a as u32);
                    }
                }
                best
            })
            .collect();
        cost = next.iter().map(|p| p.0).collect();
        parents.push(next.into_iter().map(|p| p.1).collect());
    }
    let total_cost = cost[end];
    if !total_cost.is_finite() {
        return Err(Error::InvalidArgument(
            "no grid path reaches the end point".into(),
        ));
    }
    let mut idx = vec![end; t + 1];
    for layer in (0..t).rev() {
        idx[layer] = parents[layer][idx[layer + 1]] as usize;
    }
    let mut nodes: Vec<Vec<f64>> = idx.iter().map(|&i| g.point(&coords[i])).collect();
    nodes[0] = x0.to_vec();
    nodes[t] = xdelta.to_vec();
    Ok(DpResult {
        path: Path::new(delta, nodes)?,
        cost: total_cost,
    })
}

/// A grid around the endpoints sized for seeding the minimizer: the
/// bounding box of the endpoints with a margin proportional to their
/// separation and their distance to `K`.
pub fn seed_grid(x0: &[f64], xdelta: &[f64], k: &PointSet, slices: usize) -> GridSpec {
    let d = x0.len();
    let span = crate::linalg::dist(x0, xdelta)
        .max(0.5 * (k.min_sq_dist(x0).sqrt() + k.min_sq_dist(xdelta).sqrt()))
        .max(1e-3);
    let margin = 0.5 * span;
    let lo: Vec<f64> = (0..d).map(|i| x0[i].min(xdelta[i]) - margin).collect();
    let hi: Vec<f64> = (0..d).map(|i| x0[i].max(xdelta[i]) + margin).collect();
    let per_dim = match d {
        1 => 400.0,
        2 => 80.0,
        _ => 24.0,
    };
    let extent = (0..d).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    GridSpec {
        lo,
        hi,
        resolution: extent / per_dim,
        slices,
    }
}
