use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::linalg::{dist2, dot, norm};
use crate::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// A finite set of pairwise distinct points `K = {p₁,…,p_N}` in `ℝ^d`.
///
/// Immutable after construction. The tie tolerance `ε_opt` is relative: a
/// point belongs to the optimality class of `x` when its squared distance
/// is within a factor `1 + ε_opt` of the minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec<f64>>,
    dim: usize,
    tie_tolerance: f64,
}

impl PointSet {
    pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-9;

    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_tolerance(points, Self::DEFAULT_TIE_TOLERANCE)
    }

    pub fn with_tolerance(points: Vec<Vec<f64>>, tie_tolerance: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidPointSet("empty point set".into()));
        }
        if !(tie_tolerance >= 0.0 && tie_tolerance.is_finite()) {
            return Err(Error::InvalidPointSet(format!(
                "tie tolerance must be finite and nonnegative, got {tie_tolerance}"
            )));
        }
        let dim = points[0].len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidPointSet(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidPointSet(format!("point {i} is not finite")));
            }
        }
        let max_norm = points.iter().map(|p| norm(p)).fold(0.0, f64::max);
        let min_sep = 10.0 * tie_tolerance * (1.0 + max_norm);
        if let Some((i, j)) = find_close_pair(&points, min_sep) {
            return Err(Error::InvalidPointSet(format!(
                "points {i} and {j} are closer than {min_sep:e}"
            )));
        }
        Ok(Self {
            points,
            dim,
            tie_tolerance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tie_tolerance(&self) -> f64 {
        self.tie_tolerance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Same points, different tie tolerance.
    pub fn retolerance(&self, tie_tolerance: f64) -> Result<Self> {
        Self::with_tolerance(self.points.clone(), tie_tolerance)
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `min_i |x − p_i|²`
    pub fn min_sq_dist(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| dist2(x, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Indices of the points whose squared distance to `x` is within the
    /// tie tolerance of the minimum, sorted ascending.
    pub(crate) fn tied_indices(&self, x: &[f64]) -> Vec<usize> {
        let d2: Vec<f64> = self.points.iter().map(|p| dist2(x, p)).collect();
        let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let threshold = (1.0 + self.tie_tolerance) * min;
        d2.iter()
            .enumerate()
            .filter(|(_, &v)| v <= threshold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_points(&self, class: &OptClass) -> Vec<&[f64]> {
        class.indices.iter().map(|&i| self.point(i)).collect()
    }
}

/// Detects a pair of points closer than `min_sep` by sweeping along a fixed
/// generic direction; lattice-like sets rarely share projections on it.
fn find_close_pair(points: &[Vec<f64>], min_sep: f64) -> Option<(usize, usize)> {
    let dim = points[0].len();
    let dir: Vec<f64> = (0..dim)
        .map(|i| 1.0 / (1.0 + (i as f64) * std::f64::consts::SQRT_2).sqrt())
        .collect();
    let mut proj: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (dot(p, &dir), i))
        .collect();
    proj.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let dir_norm = norm(&dir);
    let window = min_sep * dir_norm;
    let sep2 = min_sep * min_sep;
    for a in 0..proj.len() {
        for b in a + 1..proj.len() {
            if proj[b].0 - proj[a].0 > window {
                break;
            }
            let (i, j) = (proj[a].1, proj[b].1);
            if dist2(&points[i], &points[j]) <= sep2 {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// The optimality class `opt_K(x)`: indices of the nearest points of `K`.
#[derive(Debug, Clone, Serialize)]
pub struct OptClass {
    pub indices: Vec<usize>,
    pub witness: Vec<f64>,
}

impl OptClass {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// `self ⊊ other`
    pub fn is_strict_subset_of(&self, other: &OptClass) -> bool {
        self.len() < other.len() && self.indices.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &OptClass) -> Vec<usize> {
        let mut out: Vec<usize> = self.indices.iter().chain(&other.indices).copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Stable textual id, e.g. `0+3`.
    pub fn id(&self) -> String {
        self.indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl PartialEq for OptClass {
    fn eq(&self, other: &Self) -> bool {
        self.indices == other.indices
    }
}

impl Eq for OptClass {}

impl PartialOrd for OptClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OptClass {
    fn cmp(&self, other: &Self) -> Ordering {
        self.indices.cmp(&other.indices)
    }
}

impl fmt::Display for OptClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.id())
    }
}

pub fn opt_class(x: &[f64], k: &PointSet) -> Result<OptClass> {
    k.check_dim(x)?;
    Ok(OptClass {
        indices: k.tied_indices(x),
        witness: x.to_vec(),
    })
}
