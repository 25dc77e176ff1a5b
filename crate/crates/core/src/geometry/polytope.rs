use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::minnorm::min_norm_point;
use crate::linalg::{dist, dot, norm, norm2};
use crate::{Error, Result};

const FEAS_TOL: f64 = 1e-9;
const DYKSTRA_TOL: f64 = 1e-8;
const DYKSTRA_MAX_CYCLES: usize = 200_000;
const MAX_VERTEX_SUBSETS: usize = 2_000_000;
const MAX_REJECTIONS: usize = 1_000_000;

/// `{x : normal·x ≤ offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.offset
    }
}

/// A nonempty bounded polyhedron `{x : nⱼ·x ≤ bⱼ}`, certified at
/// construction by vertex enumeration (nonempty) and by checking that the
/// normals positively span `ℝ^d` (bounded).
#[derive(Debug, Clone, Serialize)]
pub struct Polytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vec<f64>>,
}

impl Polytope {
    /// Builds a polytope from raw `(normal, offset)` pairs; normals are
    /// rescaled to unit length.
    pub fn new(dim: usize, raw: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if dim == 0 || dim > super::MAX_DIM {
            return Err(Error::InvalidPolytope(format!(
                "unsupported dimension {dim}"
            )));
        }
        let mut halfspaces = Vec::with_capacity(raw.len());
        for (i, (n, b)) in raw.into_iter().enumerate() {
            if n.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: n.len(),
                });
            }
            if !b.is_finite() || n.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPolytope(format!(
                    "halfspace {i} is not finite"
                )));
            }
            let len = norm(&n);
            if len < 1e-12 {
                return Err(Error::InvalidPolytope(format!(
                    "halfspace {i} has a zero normal"
                )));
            }
            halfspaces.push(Halfspace {
                normal: n.iter().map(|c| c / len).collect(),
                offset: b / len,
            });
        }
        if halfspaces.len() <= dim {
            return Err(Error::InvalidPolytope(format!(
                "{} halfspaces cannot bound a region of ℝ^{dim}",
                halfspaces.len()
            )));
        }
        if !normals_positively_span(&halfspaces, dim)? {
            return Err(Error::InvalidPolytope("unbounded".into()));
        }
        let vertices = enumerate_vertices(&halfspaces, dim)?;
        if vertices.is_empty() {
            return Err(Error::InvalidPolytope("empty".into()));
        }
        Ok(Self {
            dim,
            halfspaces,
            vertices,
        })
    }

    /// The axis-aligned box `∏ [loᵢ, hiᵢ]`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        let d = lo.len();
        let mut raw = Vec::with_capacity(2 * d);
        for i in 0..d {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            raw.push((e.clone(), hi[i]));
            e[i] = -1.0;
            raw.push((e, -lo[i]));
        }
        Self::new(d, raw)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.violation(x) <= tol)
    }

    pub fn intersection(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let raw = self
            .halfspaces
            .iter()
            .chain(&other.halfspaces)
            .map(|h| (h.normal.clone(), h.offset))
            .collect();
        match Polytope::new(self.dim, raw) {
            Err(Error::InvalidPolytope(msg)) if msg == "empty" => Err(Error::EmptyIntersection),
            r => r,
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for i in 0..self.dim {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    /// Euclidean projection by Dykstra's alternating projections over the
    /// halfspaces, stopped when a full cycle moves the correction terms by
    /// less than `1e−8`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        if self.contains(x, 0.0) {
            return x.to_vec();
        }
        let m = self.halfspaces.len();
        let mut y = x.to_vec();
        let mut incr = vec![vec![0.0; self.dim]; m];
        let mut buf = vec![0.0; self.dim];
        for _ in 0..DYKSTRA_MAX_CYCLES {
            let mut change = 0.0;
            for (h, e) in self.halfspaces.iter().zip(incr.iter_mut()) {
                for i in 0..self.dim {
                    buf[i] = y[i] + e[i];
                }
                let v = h.violation(&buf);
                let t = v.max(0.0);
                for i in 0..self.dim {
                    let next = buf[i] - t * h.normal[i];
                    let new_e = buf[i] - next;
                    change += (new_e - e[i]) * (new_e - e[i]);
                    e[i] = new_e;
                    y[i] = next;
                }
            }
            if change < DYKSTRA_TOL * DYKSTRA_TOL {
                break;
            }
        }
        y
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        dist(x, &self.project(x))
    }

    /// Uniform sample by rejection from the bounding box. Fails for
    /// polytopes without interior.
    pub fn sample_uniform<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        for _ in 0..MAX_REJECTIONS {
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(&l, &h)| if h > l { rng.gen_range(l..h) } else { l })
                .collect();
            if self.contains(&x, 0.0) {
                return Ok(x);
            }
        }
        Err(Error::InvalidPolytope(
            "rejection sampling failed; polytope has no interior".into(),
        ))
    }
}

/// The recession cone `{v : Nv ≤ 0}` is trivial iff the origin lies in the
/// interior of `conv(normals)`; tested with a small cross-polytope.
fn normals_positively_span(hs: &[Halfspace], dim: usize) -> Result<bool> {
    let normals: Vec<&[f64]> = hs.iter().map(|h| h.normal.as_slice()).collect();
    let eps = 1e-6;
    for i in 0..dim {
        for s in [eps, -eps] {
            let mut x = vec![0.0; dim];
            x[i] = s;
            let p = min_norm_point(&normals, &x)?;
            if norm2(&crate::linalg::sub(&p, &x)) > 1e-18 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn enumerate_vertices(hs: &[Halfspace], dim: usize) -> Result<Vec<Vec<f64>>> {
    let subsets = binomial(hs.len(), dim);
    if subsets > MAX_VERTEX_SUBSETS {
        return Err(Error::InvalidPolytope(format!(
            "vertex enumeration over {subsets} subsets exceeds budget"
        )));
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    for combo in (0..hs.len()).combinations(dim) {
        let a = DMatrix::from_fn(dim, dim, |r, c| hs[combo[r]].normal[c]);
        let b = DVector::from_fn(dim, |r, _| hs[combo[r]].offset);
        let sv = a.singular_values();
        let smax = sv.max();
        if smax == 0.0 || sv.min() < 1e-12 * smax {
            continue;
        }
        let x = match a.lu().solve(&b) {
            Some(x) => x,
            None => continue,
        };
        let x: Vec<f64> = x.iter().copied().collect();
        if !x.iter().all(|c| c.is_finite()) {
            continue;
        }
        let scale = 1.0 + norm(&x);
        if hs.iter().all(|h| h.violation(&x) <= FEAS_TOL * scale)
            && !out.iter().any(|v| dist(v, &x) <= 1e-9 * scale)
        {
            out.push(x);
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n.saturating_sub(k));
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Empirical constant `M` in `dist_{A∩B}(x) ≤ M·dist_B(x)`: the maximum of
/// the ratio over `samples` points drawn uniformly in `A` (points inside
/// `B`, where the ratio is `0/0`, are skipped). The draw sequence depends
/// only on `seed`, so the result is nondecreasing in `samples`.
pub fn polytope_distance_ratio(
    a: &Polytope,
    b: &Polytope,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let ab = a.intersection(b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = a.sample_uniform(&mut rng)?;
        let db = b.distance(&x);
        if db <= 1e-12 {
            continue;
        }
        worst = worst.max(ab.distance(&x) / db);
    }
    Ok(worst)
}
