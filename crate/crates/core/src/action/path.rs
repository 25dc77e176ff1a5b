use serde::Serialize;

use crate::{Error, Result};

/// A curve on `[0, δ]` sampled at `M + 1` uniform times `kδ/M`; the first
/// and last nodes are the boundary conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Path {
    delta: f64,
    nodes: Vec<Vec<f64>>,
}

impl Path {
    pub fn new(delta: f64, nodes: Vec<Vec<f64>>) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if nodes.len() < 3 {
            return Err(Error::InvalidArgument(
                "a path needs at least 2 intervals".into(),
            ));
        }
        let d = nodes[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("zero-dimensional path".into()));
        }
        for n in &nodes {
            if n.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: n.len(),
                });
            }
            if n.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument("non-finite path node".into()));
            }
        }
        Ok(Self { delta, nodes })
    }

    /// The straight segment from `x0` to `x1` with `m` intervals.
    pub fn straight(x0: &[f64], x1: &[f64], delta: f64, m: usize) -> Result<Self> {
        if x0.len() != x1.len() {
            return Err(Error::DimensionMismatch {
                expected: x0.len(),
                got: x1.len(),
            });
        }
        let nodes = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                x0.iter().zip(x1).map(|(a, b)| a + s * (b - a)).collect()
            })
            .collect();
        Self::new(delta, nodes)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.delta / self.intervals() as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.delta * k as f64 / self.intervals() as f64
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k]
    }

    pub fn start(&self) -> &[f64] {
        &self.nodes[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.nodes[self.intervals()]
    }

    /// Node doubling: keeps every node and inserts interval midpoints.
    pub fn refine(&self) -> Path {
        let m = self.intervals();
        let mut nodes = Vec::with_capacity(2 * m + 1);
        for k in 0..m {
            nodes.push(self.nodes[k].clone());
            nodes.push(
                self.nodes[k]
                    .iter()
                    .zip(&self.nodes[k + 1])
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect(),
            );
        }
        nodes.push(self.nodes[m].clone());
        Path {
            delta: self.delta,
            nodes,
        }
    }

    /// Piecewise-linear interpolation at time `t ∈ [0, δ]`.
    pub fn sample(&self, t: f64) -> Vec<f64> {
        let m = self.intervals();
        let u = (t / self.delta * m as f64).clamp(0.0, m as f64);
        let k = (u.floor() as usize).min(m - 1);
        let s = u - k as f64;
        self.nodes[k]
            .iter()
            .zip(&self.nodes[k + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }

    /// Piecewise-linear resampling onto `m` uniform intervals.
    pub fn resample(&self, m: usize) -> Result<Path> {
        let nodes = (0..=m)
            .map(|k| self.sample(self.delta * k as f64 / m as f64))
            .collect();
        Path::new(self.delta, nodes)
    }

    /// Largest node-wise distance to another path on the same mesh.
    pub fn max_distance(&self, other: &Path) -> f64 {
        self.nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| crate::linalg::dist(a, b))
            .fold(0.0, f64::max)
    }
}
