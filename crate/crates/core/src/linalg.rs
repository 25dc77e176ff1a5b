//! Small dense helpers on `&[f64]` slices.

use nalgebra::{DMatrix, DVector};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm2(a).sqrt()
}

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[inline]
pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s·b`
#[inline]
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Solves a symmetric positive definite block tridiagonal system by block
/// elimination. `diag[k]` is `r_k × r_k`, `upper[k]` couples block `k` to
/// block `k + 1` (`r_k × r_{k+1}`); zero-sized blocks are allowed. The
/// right-hand sides are overwritten with the solution.
pub fn solve_block_tridiagonal(
    diag: &[DMatrix<f64>],
    upper: &[DMatrix<f64>],
    rhs: &mut [DVector<f64>],
) -> bool {
    let n = diag.len();
    let mut factors: Vec<Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>> = Vec::with_capacity(n);
    // Forward elimination; `carry` holds D_{k−1}⁻¹ B_{k−1}.
    let mut carry: Option<DMatrix<f64>> = None;
    for k in 0..n {
        let mut dk = diag[k].clone();
        if k > 0 {
            if let Some(c) = &carry {
                let lower = upper[k - 1].transpose();
                dk -= &lower * c;
                let y_prev = rhs[k - 1].clone();
                let fac = factors[k - 1].as_ref().expect("factor");
                let w = fac.solve(&y_prev);
                rhs[k] -= &lower * w;
            }
        }
        if dk.nrows() == 0 {
            factors.push(None);
            carry = None;
            continue;
        }
        let Some(fac) = dk.cholesky() else {
            return false;
        };
        carry = (k + 1 < n && diag[k + 1].nrows() > 0).then(|| fac.solve(&upper[k]));
        factors.push(Some(fac));
    }
    for k in (0..n).rev() {
        let Some(fac) = &factors[k] else { continue };
        let mut y = rhs[k].clone();
        if k + 1 < n && diag[k + 1].nrows() > 0 {
            y -= &upper[k] * &rhs[k + 1];
        }
        rhs[k] = fac.solve(&y);
    }
    true
}
