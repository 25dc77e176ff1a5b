//! Projection of a point onto the convex hull of finitely many vertices.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{dot, norm2, sub};
use crate::{Error, Result};

const TERMINATION_TOL: f64 = 1e-10;
const VI_TOL: f64 = 1e-9;

/// Projection of `x` onto `conv(vertices)`.
///
/// Runs Wolfe's minimum-norm-point algorithm; hulls with at most `d + 1`
/// vertices fall back to exhaustive face enumeration if Wolfe stalls or its
/// answer fails the variational inequality `(η − x)·(v − η) ≥ −1e−9`.
pub fn min_norm_point<V: AsRef<[f64]>>(vertices: &[V], x: &[f64]) -> Result<Vec<f64>> {
    validate(vertices, x)?;
    if vertices.len() == 1 {
        return Ok(vertices[0].as_ref().to_vec());
    }
    let small = vertices.len() <= x.len() + 1;
    match min_norm_point_wolfe(vertices, x) {
        Ok(eta) if satisfies_vi(vertices, x, &eta) => Ok(eta),
        Ok(eta) if !small => Ok(eta),
        Err(e) if !small => Err(e),
        _ => min_norm_point_faces(vertices, x),
    }
}

fn validate<V: AsRef<[f64]>>(vertices: &[V], x: &[f64]) -> Result<()> {
    if vertices.is_empty() {
        return Err(Error::InvalidArgument("empty vertex list".into()));
    }
    for v in vertices {
        if v.as_ref().len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: v.as_ref().len(),
            });
        }
    }
    Ok(())
}

fn satisfies_vi<V: AsRef<[f64]>>(vertices: &[V], x: &[f64], eta: &[f64]) -> bool {
    let r = sub(eta, x);
    let scale = vertices
        .iter()
        .map(|v| norm2(&sub(v.as_ref(), x)))
        .fold(1.0, f64::max);
    vertices
        .iter()
        .all(|v| dot(&r, &sub(v.as_ref(), eta)) >= -VI_TOL * scale)
}

/// Minimizer of `|Σ αᵢ pᵢ|²` over the affine hull (`Σ αᵢ = 1`) of the
/// selected points.
fn affine_minimizer(pts: &[Vec<f64>], sel: &[usize]) -> Option<Vec<f64>> {
    let k = sel.len();
    let mut a = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (r, &i) in sel.iter().enumerate() {
        for (c, &j) in sel.iter().enumerate() {
            a[(r, c)] = dot(&pts[i], &pts[j]);
        }
        a[(r, k)] = 1.0;
        a[(k, r)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k + 1);
    b[k] = 1.0;
    let sol = match a.clone().lu().solve(&b) {
        Some(s) if s.iter().all(|v| v.is_finite()) => s,
        _ => a.svd(true, true).solve(&b, 1e-14).ok()?,
    };
    let alpha: Vec<f64> = sol.iter().take(k).copied().collect();
    if alpha.iter().all(|v| v.is_finite()) {
        Some(alpha)
    } else {
        None
    }
}

fn combine(pts: &[Vec<f64>], sel: &[usize], w: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; pts[0].len()];
    for (&i, &wi) in sel.iter().zip(w) {
        for (zc, pc) in z.iter_mut().zip(&pts[i]) {
            *zc += wi * pc;
        }
    }
    z
}

/// Wolfe's minimum-norm-point algorithm on the translated vertices
/// `vᵢ − x`, with termination tolerance `1e−10` (relative to the largest
/// squared vertex norm) and an iteration cap of `10·(|V| + d)`.
pub fn min_norm_point_wolfe<V: AsRef<[f64]>>(vertices: &[V], x: &[f64]) -> Result<Vec<f64>> {
    validate(vertices, x)?;
    let pts: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v.as_ref(), x)).collect();
    let n = pts.len();
    let scale = pts
        .iter()
        .map(|p| norm2(p))
        .fold(f64::MIN_POSITIVE, f64::max);
    let cap = 10 * (n + x.len());
    let bary_tol = 1e-12;

    let start = (0..n)
        .min_by(|&a, &b| norm2(&pts[a]).total_cmp(&norm2(&pts[b])))
        .unwrap_or(0);
    let mut corral = vec![start];
    let mut lambda = vec![1.0];
    let mut z = pts[start].clone();
    let mut iterations = 0usize;

    'major: loop {
        iterations += 1;
        if iterations > cap {
            return Err(Error::MinNormNonConvergence { iterations });
        }
        let zz = norm2(&z);
        let (j, pz) = (0..n)
            .map(|j| (j, dot(&pts[j], &z)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if zz - pz <= TERMINATION_TOL * scale || corral.contains(&j) {
            break;
        }
        corral.push(j);
        lambda.push(0.0);

        loop {
            iterations += 1;
            if iterations > cap {
                return Err(Error::MinNormNonConvergence { iterations });
            }
            let alpha = match affine_minimizer(&pts, &corral) {
                Some(a) => a,
                None => {
                    // affinely dependent corral: drop the newcomer and stop
                    corral.pop();
                    lambda.pop();
                    break 'major;
                }
            };
            if alpha.iter().all(|&a| a > bary_tol) {
                z = combine(&pts, &corral, &alpha);
                lambda = alpha;
                break;
            }
            let theta = lambda
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= bary_tol)
                .map(|(&l, &a)| if l - a > 0.0 { l / (l - a) } else { 0.0 })
                .fold(1.0, f64::min);
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            let newcomer = *corral.last().expect("nonempty");
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_l = Vec::with_capacity(corral.len());
            for (&c, &l) in corral.iter().zip(&lambda) {
                if l > bary_tol {
                    keep_c.push(c);
                    keep_l.push(l);
                }
            }
            if keep_c.is_empty() {
                keep_c.push(corral[0]);
                keep_l.push(1.0);
            }
            let total: f64 = keep_l.iter().sum();
            keep_l.iter_mut().for_each(|l| *l /= total);
            let dropped_newcomer = !keep_c.contains(&newcomer);
            corral = keep_c;
            lambda = keep_l;
            z = combine(&pts, &corral, &lambda);
            if dropped_newcomer && theta == 0.0 {
                // no descent possible through the newcomer
                break 'major;
            }
        }
    }
    Ok(crate::linalg::add(&z, x))
}

/// Exhaustive search over all affinely independent faces of the hull.
/// Exponential in `|V|`; intended for `|V| ≤ d + 1` and as an independent
/// check of [`min_norm_point_wolfe`].
pub fn min_norm_point_faces<V: AsRef<[f64]>>(vertices: &[V], x: &[f64]) -> Result<Vec<f64>> {
    validate(vertices, x)?;
    let n = vertices.len();
    if n > 20 {
        return Err(Error::InvalidArgument(format!(
            "face enumeration over {n} vertices is too large"
        )));
    }
    let pts: Vec<Vec<f64>> = vertices.iter().map(|v| sub(v.as_ref(), x)).collect();
    let d = x.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << n) {
        let sel: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if sel.len() > d + 1 || !affinely_independent(&pts, &sel) {
            continue;
        }
        let alpha = match affine_minimizer(&pts, &sel) {
            Some(a) => a,
            None => continue,
        };
        if alpha.iter().any(|&a| a < -1e-12) {
            continue;
        }
        let z = combine(&pts, &sel, &alpha);
        let zz = norm2(&z);
        if best.as_ref().is_none_or(|(b, _)| zz < *b) {
            best = Some((zz, z));
        }
    }
    let (_, z) = best.expect("singleton faces are always feasible");
    Ok(crate::linalg::add(&z, x))
}

fn affinely_independent(pts: &[Vec<f64>], sel: &[usize]) -> bool {
    if sel.len() <= 1 {
        return true;
    }
    let d = pts[0].len();
    let k = sel.len() - 1;
    let base = &pts[sel[0]];
    let m = DMatrix::from_fn(d, k, |r, c| pts[sel[c + 1]][r] - base[r]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    max > 0.0 && sv.iter().all(|&s| s > 1e-10 * max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn segment_midpoint() {
        let v = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let eta = min_norm_point(&v, &[0.0, 0.0]).unwrap();
        assert!(close(&eta, &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn inside_one_dimensional_hull() {
        let v = [vec![-1.0], vec![1.0]];
        let eta = min_norm_point(&v, &[0.0]).unwrap();
        assert!(eta[0].abs() < 1e-12);
    }

    #[test]
    fn vertex_is_nearest() {
        let v = [vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let eta = min_norm_point(&v, &[-1.0, -2.0]).unwrap();
        assert!(close(&eta, &[0.0, 0.0], 1e-12));
    }

    #[test]
    fn wolfe_and_faces_agree_on_a_square() {
        // more vertices than d + 1 exercises Wolfe alone
        let v = [
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ];
        for x in [[2.0, 0.5], [0.5, 0.5], [-1.0, 3.0], [0.3, -0.2]] {
            let a = min_norm_point_wolfe(&v, &x).unwrap();
            let b = min_norm_point_faces(&v, &x).unwrap();
            assert!(close(&a, &b, 1e-10), "{x:?}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn duplicate_and_collinear_vertices() {
        let v = [
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![1.0, 0.0],
        ];
        let eta = min_norm_point(&v, &[1.5, 3.0]).unwrap();
        assert!(close(&eta, &[1.5, 0.0], 1e-10));
    }

    #[test]
    fn errors() {
        let empty: [Vec<f64>; 0] = [];
        assert!(min_norm_point(&empty, &[0.0]).is_err());
        assert!(min_norm_point(&[vec![0.0, 1.0]], &[0.0]).is_err());
    }
}
