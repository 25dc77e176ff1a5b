use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockpath::geometry::{
    cell_frame, min_norm_point, opt_class, polytope_distance_ratio, PointSet, Polytope,
};
use shockpath::linalg::{dist, dist2, dot, sub};

#[path = "support/grid_oracle.rs"]
mod grid_oracle;
use grid_oracle::grid_projection;

#[test]
fn min_norm_matches_grid_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=4);
        let vertices: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let eta = min_norm_point(&vertices, &x).unwrap();
        let oracle = grid_projection(&vertices, &x);
        worst = worst.max(dist(&eta, &oracle));
    }
    assert!(worst <= 1e-6, "worst deviation {worst:e}");
}

#[test]
fn opt_class_examples() {
    let k = PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
    assert_eq!(opt_class(&[-0.3], &k).unwrap().indices, vec![0]);
    assert_eq!(opt_class(&[0.0], &k).unwrap().indices, vec![0, 1]);
    assert_eq!(opt_class(&[1.0], &k).unwrap().indices, vec![1]);
}

#[test]
fn cell_frame_examples() {
    let k = PointSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
    let class = opt_class(&[0.0, -1.0], &k).unwrap();
    assert_eq!(class.indices, vec![0, 2]);
    let frame = cell_frame(&class, &k).unwrap();
    assert_eq!(frame.basis_a().len(), 1);
    assert_eq!(frame.basis_b().len(), 1);
    assert!(frame.basis_a()[0][1].abs() < 1e-12);
    assert!(frame.basis_b()[0][0].abs() < 1e-12);
    assert!(frame.p_h().iter().all(|c| c.abs() < 1e-12));
}

#[test]
fn corner_touching_ratio_is_root_two() {
    let a = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let b = Polytope::new(
        2,
        vec![
            (vec![1.0, 1.0], 0.0),
            (vec![1.0, 0.0], 2.0),
            (vec![-1.0, 0.0], 2.0),
            (vec![0.0, 1.0], 2.0),
            (vec![0.0, -1.0], 2.0),
        ],
    )
    .unwrap();
    let m1 = polytope_distance_ratio(&a, &b, 10_000, 3).unwrap();
    let m2 = polytope_distance_ratio(&a, &b, 20_000, 3).unwrap();
    assert!((m1 - 2f64.sqrt()).abs() <= 0.05, "{m1}");
    assert!((m2 - m1).abs() <= 0.02 * m1, "{m1} {m2}");
}

#[test]
fn ratio_is_monotone_in_samples() {
    let a = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let b = Polytope::new(
        2,
        vec![
            (vec![1.0, 2.0], 0.5),
            (vec![-1.0, 0.0], 1.0),
            (vec![0.0, -1.0], 1.0),
            (vec![1.0, 0.0], 3.0),
        ],
    )
    .unwrap();
    let mut last = 0.0;
    for samples in [100, 400, 1600, 6400] {
        let m = polytope_distance_ratio(&a, &b, samples, 11).unwrap();
        assert!(m + 1e-12 >= last, "{samples}: {m} < {last}");
        assert!(m.is_finite());
        last = m;
    }
}

fn point_strategy(
    d: usize,
    n: std::ops::RangeInclusive<usize>,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| {
        (
            point_strategy(d, 1..=5),
            prop::collection::vec(-4.0..4.0f64, d),
            prop::collection::vec(-4.0..4.0f64, d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_satisfies_variational_inequality((v, x, _) in instance()) {
        let eta = min_norm_point(&v, &x).unwrap();
        let r = sub(&eta, &x);
        for p in &v {
            prop_assert!(dot(&r, &sub(p, &eta)) >= -1e-9);
        }
    }

    #[test]
    fn projection_is_one_lipschitz((v, x, y) in instance()) {
        let a = min_norm_point(&v, &x).unwrap();
        let b = min_norm_point(&v, &y).unwrap();
        prop_assert!(dist(&a, &b) <= dist(&x, &y) + 1e-9);
    }

    #[test]
    fn convex_combinations_are_fixed(
        (v, w) in (1usize..=3).prop_flat_map(|d| (point_strategy(d, 1..=4), prop::collection::vec(0.01..1.0f64, 4)))
    ) {
        let total: f64 = w[..v.len()].iter().sum();
        let d = v[0].len();
        let mut x = vec![0.0; d];
        for (p, wi) in v.iter().zip(&w) {
            for i in 0..d {
                x[i] += wi / total * p[i];
            }
        }
        let eta = min_norm_point(&v, &x).unwrap();
        prop_assert!(dist(&eta, &x) <= 1e-9);
    }

    #[test]
    fn frames_are_orthogonal_and_complementary(
        (pts, x) in (1usize..=3).prop_flat_map(|d| (point_strategy(d, 2..=6), prop::collection::vec(-3.0..3.0f64, d)))
    ) {
        let Ok(k) = PointSet::new(pts) else { return Ok(()) };
        // Exercise every class reachable from x and from pairwise midpoints.
        let mut queries = vec![x];
        for i in 0..k.len() {
            for j in i + 1..k.len() {
                queries.push(k.point(i).iter().zip(k.point(j)).map(|(a, b)| 0.5 * (a + b)).collect());
            }
        }
        for q in &queries {
            let class = opt_class(q, &k).unwrap();
            if let Ok(frame) = cell_frame(&class, &k) {
                prop_assert_eq!(frame.basis_a().len() + frame.basis_b().len(), k.dim());
                prop_assert!(frame.orthogonality_residual() <= 1e-10);
                prop_assert!(frame.equidistance_residual(&k) <= 1e-8);
            }
        }
    }

    #[test]
    fn opt_class_is_robust_to_tolerance_rescaling(
        (pts, x, s) in (1usize..=3).prop_flat_map(|d| (point_strategy(d, 1..=6), prop::collection::vec(-4.0..4.0f64, d), 0.5..1.0f64))
    ) {
        let Ok(k) = PointSet::new(pts) else { return Ok(()) };
        let eps = k.tie_tolerance();
        let class = opt_class(&x, &k).unwrap();
        let nearest = class.indices[0];
        // Distance from x to the bisector between the nearest point and any other.
        let far = (0..k.len()).filter(|&j| !class.contains(j)).all(|j| {
            let gap = dist2(&x, k.point(j)) - dist2(&x, k.point(nearest));
            gap / (2.0 * dist(k.point(j), k.point(nearest))) >= 10.0 * eps
        });
        prop_assume!(far && class.len() == 1);
        let rescaled = k.retolerance(eps * s).unwrap();
        prop_assert_eq!(opt_class(&x, &rescaled).unwrap().indices, class.indices);
    }
}
