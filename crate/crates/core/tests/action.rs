use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shockpath::action::{
    action_gradient, constrained_minimize, dp_oracle, evaluate_action, minimize, GridSpec, Path,
    Shape, SolverConfig,
};
use shockpath::geometry::{opt_class, PointSet, Polytope};
use shockpath::linalg::{dist, dist2};

fn pair() -> PointSet {
    PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap()
}

fn example2() -> PointSet {
    PointSet::new(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap()
}

/// Trapezoid action with the potential `h(|x − center|²)`.
fn surrogate_action(path: &Path, center: &[f64], h: Shape) -> f64 {
    let dt = path.dt();
    let nodes = path.nodes();
    let hv: Vec<f64> = nodes.iter().map(|x| h.eval(dist2(x, center))).collect();
    (0..path.intervals())
        .map(|j| dist2(&nodes[j + 1], &nodes[j]) / dt + 0.5 * dt * (hv[j] + hv[j + 1]))
        .sum()
}

fn shapes() -> impl Strategy<Value = Shape> {
    prop_oneof![
        Just(Shape::Identity),
        (0.5..3.0f64).prop_map(|p| Shape::Power { p }),
        (0.5..2.0f64, 0.0..1.0f64).prop_map(|(a, b)| Shape::Affine { a, b }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(
        seed in 0u64..10_000,
        h in shapes(),
        d in 1usize..=3,
    ) {
        // Smooth random path inside the cell of the first point.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = vec![vec![0.0; d]];
        for _ in 0..3 {
            pts.push((0..d).map(|_| rng.gen_range(3.0..6.0) * if rng.gen() { 1.0 } else { -1.0 }).collect());
        }
        let k = PointSet::new(pts).unwrap();
        let m = 24;
        let phase: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..6.0)).collect();
        let nodes: Vec<Vec<f64>> = (0..=m)
            .map(|j| {
                let t = j as f64 / m as f64;
                (0..d).map(|i| 0.5 * (phase[i] + 3.0 * t).sin() + 0.3 * t).collect()
            })
            .collect();
        let path = Path::new(1.0, nodes).unwrap();
        let grad = action_gradient(&path, &k, h).unwrap();
        let eps = 1e-6;
        for j in 1..m {
            for i in 0..d {
                let bump = |s: f64| {
                    let mut nodes = path.nodes().to_vec();
                    nodes[j][i] += s;
                    evaluate_action(&Path::new(1.0, nodes).unwrap(), &k, h).unwrap().total
                };
                let fd = (bump(eps) - bump(-eps)) / (2.0 * eps);
                let scale = grad[j][i].abs().max(1.0);
                prop_assert!((fd - grad[j][i]).abs() <= 1e-5 * scale, "node {} coord {}: {} vs {}", j, i, fd, grad[j][i]);
            }
        }
    }

    #[test]
    fn single_cell_gradient_is_the_smooth_one(seed in 0u64..10_000, h in shapes()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let k = PointSet::new(vec![p.clone()]).unwrap();
        let m = 16;
        let nodes: Vec<Vec<f64>> = (0..=m).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let path = Path::new(2.0, nodes).unwrap();
        let dt = path.dt();
        let grad = action_gradient(&path, &k, h).unwrap();
        let x = path.nodes();
        for j in 1..m {
            for i in 0..2 {
                let smooth = 2.0 * (2.0 * x[j][i] - x[j - 1][i] - x[j + 1][i]) / dt
                    + dt * h.deriv(dist2(&x[j], &p)) * 2.0 * (x[j][i] - p[i]);
                prop_assert!((grad[j][i] - smooth).abs() <= 1e-9 * smooth.abs().max(1.0));
            }
        }
    }

    #[test]
    fn action_never_exceeds_the_zone_surrogate(seed in 0u64..10_000) {
        // Paths in the closed cell of 1 for K = {−1, 1}: η = 1 except on the
        // bisector, where the true slope is smaller.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = pair();
        let m = 20;
        let touch = rng.gen_bool(0.5);
        let nodes: Vec<Vec<f64>> = (0..=m)
            .map(|j| if touch && j % 5 == 0 { vec![0.0] } else { vec![rng.gen_range(0.01..2.0)] })
            .collect();
        let path = Path::new(1.0, nodes).unwrap();
        let actual = evaluate_action(&path, &k, Shape::Identity).unwrap().total;
        let surrogate = surrogate_action(&path, &[1.0], Shape::Identity);
        prop_assert!(actual <= surrogate + 1e-12);
        if !touch {
            prop_assert!((actual - surrogate).abs() <= 1e-12 * surrogate);
        }
    }
}

#[test]
fn breakdown_adds_up() {
    let path = Path::straight(&[-1.0], &[1.0], 1.0, 64).unwrap();
    let b = evaluate_action(&path, &pair(), Shape::Identity).unwrap();
    assert!((b.total - b.kinetic - b.potential).abs() < 1e-12);
    assert!(b.kinetic >= 0.0 && b.potential >= 0.0);
    assert!(b.per_interval.iter().all(|&(k, p)| k >= 0.0 && p >= 0.0));
}

#[test]
fn trivial_minimizer_is_constant() {
    let r = minimize(
        &[0.0],
        &[0.0],
        1.0,
        &pair(),
        Shape::Identity,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(r.converged);
    assert!(r.breakdown.total.abs() < 1e-10);
    assert!(r.path.nodes().iter().all(|x| x[0].abs() < 1e-8));
}

#[test]
fn waiting_minimizer_for_small_c() {
    let c = 0.2;
    let r = minimize(
        &[-c],
        &[c],
        1.0,
        &pair(),
        Shape::Identity,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(r.converged);
    assert!(
        (r.breakdown.total - 2.0 * c * (2.0 - c)).abs() <= 0.01,
        "{}",
        r.breakdown.total
    );
    // Refinement stability between the last two stages.
    let n = r.stages.len();
    let (a, b) = (r.stages[n - 2].action, r.stages[n - 1].action);
    assert!((a - b).abs() <= 0.01 * b, "{a} {b}");
    // The path rests near 0 over an interval starting near ln(1/(1−c)).
    let near: Vec<usize> = (0..=r.path.intervals())
        .filter(|&j| r.path.node(j)[0].abs() < 1e-3)
        .collect();
    let t0 = r.path.time(near[0]);
    let t1 = r.path.time(*near.last().unwrap());
    assert!((t0 - (1.0 / (1.0 - c)).ln()).abs() <= 0.02, "{t0}");
    assert!(t1 - t0 >= 0.4, "{t0} {t1}");
}

#[test]
fn crossing_minimizer_for_c_one_does_not_wait() {
    let r = minimize(
        &[-1.0],
        &[1.0],
        1.0,
        &pair(),
        Shape::Identity,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(r.converged);
    let on_bisector = (0..=r.path.intervals())
        .filter(|&j| opt_class(r.path.node(j), &pair()).unwrap().len() == 2)
        .count();
    assert!(on_bisector <= 1);
    let dt = r.path.dt();
    let near = (0..=r.path.intervals())
        .filter(|&j| r.path.node(j)[0].abs() < 2.0 * dt)
        .count();
    assert!(near <= 4, "{near} nodes near the bisector");
}

#[test]
fn singleton_minimizer_follows_the_cosh_profile() {
    let k = PointSet::new(vec![vec![0.3, -0.2]]).unwrap();
    let (x0, x1) = ([1.3, 0.8], [-0.7, 0.5]);
    let delta = 1.5;
    let r = minimize(
        &x0,
        &x1,
        delta,
        &k,
        Shape::Identity,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(r.converged);
    assert_eq!(r.path.intervals(), 512);
    let p = k.point(0);
    let mut worst: f64 = 0.0;
    for j in 0..=512 {
        let t = r.path.time(j);
        let exact: Vec<f64> = (0..2)
            .map(|i| {
                p[i] + ((x0[i] - p[i]) * (delta - t).sinh() + (x1[i] - p[i]) * t.sinh())
                    / delta.sinh()
            })
            .collect();
        worst = worst.max(dist(r.path.node(j), &exact));
    }
    assert!(worst <= 1e-3, "{worst:e}");
}

#[test]
fn dp_stationary_and_example_costs() {
    let k = pair();
    let grid = GridSpec {
        lo: vec![-1.5],
        hi: vec![1.5],
        resolution: 0.05,
        slices: 20,
    };
    let r = dp_oracle(
        &[1.0],
        &[1.0],
        2.0,
        &k,
        Shape::Affine { a: 1.0, b: 0.25 },
        &grid,
    )
    .unwrap();
    assert!((r.cost - 2.0 * 0.25).abs() < 1e-12);

    let grid = GridSpec {
        lo: vec![-0.5],
        hi: vec![0.5],
        resolution: 0.01,
        slices: 100,
    };
    let r = dp_oracle(&[-0.2], &[0.2], 1.0, &k, Shape::Identity, &grid).unwrap();
    assert!((r.cost - 0.72).abs() <= 0.03 * 0.72, "{}", r.cost);

    let s = minimize(
        &[-0.2],
        &[0.2],
        1.0,
        &k,
        Shape::Identity,
        &SolverConfig::default(),
    )
    .unwrap();
    // Dominance up to the grid slack: resolution times the Lipschitz bound
    // of the discrete action over the box.
    assert!(s.breakdown.total <= r.cost + 0.01 * 4.0);
}

#[test]
fn dp_cost_is_monotone_under_nested_refinement() {
    let k = example2();
    let mut last = f64::INFINITY;
    for res in [0.2, 0.1, 0.05] {
        let grid = GridSpec {
            lo: vec![-0.4, -1.2],
            hi: vec![0.4, 0.4],
            resolution: res,
            slices: 20,
        };
        let r = dp_oracle(&[0.0, -1.0], &[0.0, 0.0], 1.0, &k, Shape::Identity, &grid).unwrap();
        assert!(r.cost <= last + 1e-12, "{res}: {} > {last}", r.cost);
        last = r.cost;
    }
}

fn coarse() -> SolverConfig {
    SolverConfig {
        intervals: 128,
        refinements: 2,
        ..Default::default()
    }
}

#[test]
fn inactive_constraint_matches_unconstrained() {
    let center = [0.2, -0.1];
    let bigbox = Polytope::from_box(&[-10.0, -10.0], &[10.0, 10.0]).unwrap();
    let (x0, x1) = ([1.0, 0.5], [-0.5, 1.0]);
    let c =
        constrained_minimize(&x0, &x1, 1.0, &bigbox, &center, Shape::Identity, &coarse()).unwrap();
    let u = minimize(
        &x0,
        &x1,
        1.0,
        &PointSet::new(vec![center.to_vec()]).unwrap(),
        Shape::Identity,
        &coarse(),
    )
    .unwrap();
    assert!(c.converged && u.converged);
    assert!(
        (c.value - u.breakdown.total).abs() <= 1e-6,
        "{} {}",
        c.value,
        u.breakdown.total
    );
}

#[test]
fn constrained_to_the_zone_segment() {
    let k = example2();
    let seg = Polytope::from_box(&[0.0, -2.0], &[0.0, 0.0]).unwrap();
    let (x0, x1) = ([0.0, -1.0], [0.0, 0.0]);
    let c =
        constrained_minimize(&x0, &x1, 1.0, &seg, &[0.0, 0.0], Shape::Identity, &coarse()).unwrap();
    assert!(c.converged);
    assert!(c
        .path
        .nodes()
        .iter()
        .all(|x| x[0].abs() <= 1e-12 && x[1] <= 1e-12));
    let own = evaluate_action(&c.path, &k, Shape::Identity).unwrap().total;
    assert!((own - c.value).abs() <= 1e-9);

    // Second differences against the half-gradient bound of Ψ.
    let dt = c.path.dt();
    let x = c.path.nodes();
    for j in 1..c.path.intervals() {
        let acc: Vec<f64> = (0..2)
            .map(|i| (x[j + 1][i] - 2.0 * x[j][i] + x[j - 1][i]) / (dt * dt))
            .collect();
        let bound = dist(&x[j], &[0.0, 0.0]);
        assert!(dist(&acc, &[0.0, 0.0]) <= bound + 20.0 * dt, "node {j}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let amp = rng.gen_range(0.01..0.3) * if rng.gen() { 1.0 } else { -1.0 };
        let nodes: Vec<Vec<f64>> = x
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let t = c.path.time(j);
                vec![p[0] + amp * (std::f64::consts::PI * t).sin(), p[1]]
            })
            .collect();
        let other = evaluate_action(&Path::new(1.0, nodes).unwrap(), &k, Shape::Identity)
            .unwrap()
            .total;
        assert!(own < other, "{own} >= {other}");
    }
}

#[test]
fn constrained_path_hugs_the_boundary() {
    let square = Polytope::from_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    let start = [0.5, 0.0];
    let cfg = coarse();
    let c = constrained_minimize(
        &start,
        &start,
        1.0,
        &square,
        &[0.5, -1.0],
        Shape::Identity,
        &cfg,
    )
    .unwrap();
    assert!(c.converged);
    assert!(c.residual <= cfg.grad_tol);
    assert!(c
        .path
        .nodes()
        .iter()
        .all(|x| x[1].abs() <= 1e-9 && (x[0] - 0.5).abs() <= 1e-9));
}
