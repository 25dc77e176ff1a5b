use nalgebra::DMatrix;
use serde::Serialize;

use super::pointset::{OptClass, PointSet};
use crate::linalg::{dist2, dot, norm2};
use crate::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_CUTOFF: f64 = 1e-10;

/// Orthonormal frames of the affine span `A_H` of a point collection and
/// of its equidistance space `B_H`, together with their intersection
/// `p_H` (the circumcenter of `H` inside `A_H`).
#[derive(Debug, Clone, Serialize)]
pub struct AffineFrame {
    pub basis_a: Vec<Vec<f64>>,
    pub basis_b: Vec<Vec<f64>>,
    pub p_h: Vec<f64>,
}

impl AffineFrame {
    pub fn dim(&self) -> usize {
        self.p_h.len()
    }

    /// Orthogonal projection of a point onto `B_H`.
    pub fn project_onto_b(&self, x: &[f64]) -> Vec<f64> {
        let rel: Vec<f64> = x.iter().zip(&self.p_h).map(|(a, b)| a - b).collect();
        let mut out = self.p_h.clone();
        for b in &self.basis_b {
            let c = dot(&rel, b);
            for (o, bc) in out.iter_mut().zip(b) {
                *o += c * bc;
            }
        }
        out
    }

    /// Orthogonal projection of a direction onto the linear part of `B_H`.
    pub fn project_direction_onto_b(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for b in &self.basis_b {
            let c = dot(v, b);
            for (o, bc) in out.iter_mut().zip(b) {
                *o += c * bc;
            }
        }
        out
    }

    pub fn project_direction_onto_b_in_place(&self, v: &mut [f64]) {
        if self.basis_b.len() == v.len() {
            return;
        }
        let p = self.project_direction_onto_b(v);
        v.copy_from_slice(&p);
    }
}

/// Builds the frame for an arbitrary nonempty collection of points.
///
/// Fails with [`Error::DegenerateClass`] when the points are not
/// cospherical in their affine span, in which case `B_H` is empty.
pub fn affine_frame(points: &[&[f64]]) -> Result<AffineFrame> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty collection".into()))?;
    let d = first.len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidArgument("inconsistent dimensions".into()));
    }
    let k = points.len() - 1;
    if k == 0 {
        return Ok(AffineFrame {
            basis_a: Vec::new(),
            basis_b: identity(d),
            p_h: first.to_vec(),
        });
    }
    // columns p_i − p_0, zero-padded to a square matrix so that U is full
    let cols = k.max(d);
    let diffs = DMatrix::from_fn(d, cols, |r, c| {
        if c < k {
            points[c + 1][r] - first[r]
        } else {
            0.0
        }
    });
    let svd = diffs.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::DegenerateClass("coincident points".into()));
    }
    let mut basis_a = Vec::new();
    let mut basis_b = Vec::new();
    for (j, &s) in svd.singular_values.iter().enumerate() {
        let col: Vec<f64> = u.column(j).iter().copied().collect();
        if s > RANK_CUTOFF * smax {
            basis_a.push(col);
        } else {
            basis_b.push(col);
        }
    }

    // p_H = p_0 + Σ c_j a_j with (p_i − p_0)·Σ c_j a_j = ½|p_i − p_0|²
    let ra = basis_a.len();
    let m = DMatrix::from_fn(k, ra, |i, j| {
        let di: Vec<f64> = (0..d).map(|r| diffs[(r, i)]).collect();
        dot(&di, &basis_a[j])
    });
    let rhs = nalgebra::DVector::from_fn(k, |i, _| 0.5 * dist2(points[i + 1], first));
    let msvd = m.clone().svd(true, true);
    let c = msvd
        .solve(&rhs, 1e-13 * smax)
        .map_err(|e| Error::DegenerateClass(e.to_string()))?;
    let resid = (&m * &c - &rhs).norm();
    let scale = rhs.norm().max(f64::MIN_POSITIVE);
    if resid > 1e-8 * scale {
        return Err(Error::DegenerateClass(format!(
            "points are not cospherical in their affine span (residual {resid:e})"
        )));
    }
    let mut p_h = first.to_vec();
    for (j, a) in basis_a.iter().enumerate() {
        for (p, ac) in p_h.iter_mut().zip(a) {
            *p += c[j] * ac;
        }
    }
    Ok(AffineFrame {
        basis_a,
        basis_b,
        p_h,
    })
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Frame of a Voronoi cell `V_H` for an optimality class `H`.
#[derive(Debug, Clone, Serialize)]
pub struct CellFrame {
    pub class: OptClass,
    pub frame: AffineFrame,
}

impl CellFrame {
    pub fn basis_a(&self) -> &[Vec<f64>] {
        &self.frame.basis_a
    }

    pub fn basis_b(&self) -> &[Vec<f64>] {
        &self.frame.basis_b
    }

    pub fn p_h(&self) -> &[f64] {
        &self.frame.p_h
    }

    /// Largest `|⟨a, b⟩|` over pairs of A- and B-basis vectors.
    pub fn orthogonality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in self.basis_a() {
            for b in self.basis_b() {
                worst = worst.max(dot(a, b).abs());
            }
        }
        worst
    }

    /// Largest spread of squared distances from the points of `H`, sampled
    /// at `p_H` and at `p_H + b` for each B-basis vector `b`.
    pub fn equidistance_residual(&self, k: &PointSet) -> f64 {
        let pts = k.class_points(&self.class);
        let mut probes = vec![self.p_h().to_vec()];
        for b in self.basis_b() {
            probes.push(self.p_h().iter().zip(b).map(|(p, bc)| p + bc).collect());
        }
        let mut worst = 0.0f64;
        for x in &probes {
            let d2: Vec<f64> = pts.iter().map(|p| dist2(x, p)).collect();
            let lo = d2.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = d2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((hi - lo) / (1.0 + norm2(x)));
        }
        worst
    }
}

pub fn cell_frame(class: &OptClass, k: &PointSet) -> Result<CellFrame> {
    if class.is_empty() {
        return Err(Error::InvalidArgument("empty optimality class".into()));
    }
    if let Some(&bad) = class.indices.iter().find(|&&i| i >= k.len()) {
        return Err(Error::InvalidArgument(format!("index {bad} out of range")));
    }
    let frame = affine_frame(&k.class_points(class))?;
    Ok(CellFrame {
        class: class.clone(),
        frame,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::opt_class;

    #[test]
    fn one_dimensional_bisector() {
        let k = PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
        let h = opt_class(&[0.0], &k).unwrap();
        let f = cell_frame(&h, &k).unwrap();
        assert_eq!(f.basis_b().len(), 0);
        assert_eq!(f.basis_a().len(), 1);
        assert!(f.p_h()[0].abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair_in_plane() {
        let k = PointSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let h = OptClass {
            indices: vec![0, 2],
            witness: vec![0.0, -1.0],
        };
        let f = cell_frame(&h, &k).unwrap();
        assert_eq!(f.basis_a().len(), 1);
        assert_eq!(f.basis_b().len(), 1);
        assert!(f.basis_a()[0][0].abs() > 1.0 - 1e-12);
        assert!(f.basis_b()[0][1].abs() > 1.0 - 1e-12);
        assert!(f.p_h().iter().all(|c| c.abs() < 1e-12));
        assert!(f.orthogonality_residual() <= 1e-10);
        assert!(f.equidistance_residual(&k) <= 1e-12);
    }

    #[test]
    fn singleton_has_full_b() {
        let k = PointSet::new(vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let h = OptClass {
            indices: vec![0],
            witness: vec![1.0, 2.0, 3.0],
        };
        let f = cell_frame(&h, &k).unwrap();
        assert_eq!(f.basis_a().len(), 0);
        assert_eq!(f.basis_b().len(), 3);
        assert_eq!(f.p_h(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn cocircular_square_is_rank_deficient_but_valid() {
        let k = PointSet::new(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 1.0],
        ])
        .unwrap();
        let h = opt_class(&[0.5, 0.5], &k).unwrap();
        assert_eq!(h.len(), 4);
        let f = cell_frame(&h, &k).unwrap();
        assert_eq!(f.basis_a().len(), 2);
        assert_eq!(f.basis_b().len(), 0);
        assert!((f.p_h()[0] - 0.5).abs() < 1e-12 && (f.p_h()[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn collinear_triple_has_no_equidistance_locus() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        assert!(matches!(
            affine_frame(&refs),
            Err(Error::DegenerateClass(_))
        ));
    }

    #[test]
    fn triangle_circumcenter() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        let f = affine_frame(&refs).unwrap();
        assert!((f.p_h[0] - 1.0).abs() < 1e-12 && (f.p_h[1] - 1.0).abs() < 1e-12);
        assert!(f.basis_b.is_empty());
    }
}
