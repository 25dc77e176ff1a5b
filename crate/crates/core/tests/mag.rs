use proptest::prelude::*;
use shockpath::action::{evaluate_action, Path, Shape, SolverConfig};
use shockpath::analysis::regularity_report;
use shockpath::geometry::PointSet;
use shockpath::mag::{build_mag, particle_paths, solve_mag, stability_run, window_certificate};
use shockpath::potential::zone_table;

/// Relabels particles: block `i` of the result is block `perm[i]` of `x`.
fn permute(x: &[f64], n: usize, perm: &[usize]) -> Vec<f64> {
    perm.iter()
        .flat_map(|&p| x[p * n..(p + 1) * n].to_vec())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn action_is_invariant_under_relabeling(
        nodes in prop::collection::vec(prop::collection::vec(-0.9..1.4f64, 3), 6..12),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
    ) {
        let sys = build_mag(&[vec![0.0], vec![0.3], vec![0.6]], 1, 3, 1).unwrap();
        let path = Path::new(1.0, nodes.clone()).unwrap();
        let swapped = Path::new(1.0, nodes.iter().map(|x| permute(x, 1, &perm)).collect()).unwrap();
        for h in [Shape::Identity, Shape::Power { p: 1.5 }] {
            let a = evaluate_action(&path, &sys.k, h).unwrap().total;
            let b = evaluate_action(&swapped, &sys.k, h).unwrap().total;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a), "{} vs {}", a, b);
        }
    }

    #[test]
    fn two_dimensional_particles_relabel_too(
        nodes in prop::collection::vec(prop::collection::vec(-0.4..0.9f64, 4), 5..9),
    ) {
        let sys = build_mag(&[vec![0.0, 0.0], vec![0.5, 0.25]], 2, 2, 1).unwrap();
        let path = Path::new(1.0, nodes.clone()).unwrap();
        let swapped = Path::new(1.0, nodes.iter().map(|x| permute(x, 2, &[1, 0])).collect()).unwrap();
        let a = evaluate_action(&path, &sys.k, Shape::Identity).unwrap().total;
        let b = evaluate_action(&swapped, &sys.k, Shape::Identity).unwrap().total;
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }
}

#[test]
fn symmetric_square_configuration_is_balanced() {
    let sys = build_mag(&[vec![0.0, 0.0], vec![0.5, 0.5]], 2, 2, 1).unwrap();
    assert_eq!(sys.k.len(), 2 * 81);
    let lo = vec![-1.0; 4];
    let hi = vec![1.5; 4];
    let table = zone_table(&sys.k, (&lo, &hi), 2000, 3).unwrap();
    assert!(table.balanced, "witness {:?}", table.witness);
}

#[test]
fn constant_sequence_gives_constant_actions() {
    let k = PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
    let sets = vec![k.clone(), k.clone(), k];
    let ends = vec![(vec![-0.2], vec![0.2]); 3];
    let cfg = SolverConfig {
        intervals: 128,
        refinements: 2,
        ..Default::default()
    };
    let actions = stability_run(&sets, &ends, 1.0, Shape::Identity, &cfg).unwrap();
    assert!(
        actions.iter().all(|a| (a - actions[0]).abs() <= 1e-12),
        "{actions:?}"
    );
}

#[test]
fn overtaking_particles_collide() {
    let run = solve_mag(
        &[vec![0.0], vec![0.5]],
        1,
        2,
        &[0.2, 0.3],
        &[0.35, 0.25],
        1.0,
        Shape::Identity,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(run.result.converged);
    assert!(window_certificate(&run.system, &run.result.path).unwrap());

    let rep = regularity_report(&run.result.path, &run.system.k, Shape::Identity, 3).unwrap();
    let effective = rep.events.iter().filter(|e| e.kind.is_effective()).count();
    assert!(effective >= 1, "{:?}", rep.shock_count_by_kind);
    let dt = run.result.path.dt();
    assert!(rep.energy_std_away_from_shocks <= (5.0 * dt).max(1e-3));
    assert!(
        rep.momentum_residuals.iter().all(|&r| r <= 5.0 * dt),
        "{:?}",
        rep.momentum_residuals
    );

    // The lifted trajectories cross.
    let pp = particle_paths(&run.system, &run.result.path).unwrap();
    let gap: Vec<f64> = pp.lifted[0]
        .iter()
        .zip(&pp.lifted[1])
        .map(|(a, b)| a[0] - b[0])
        .collect();
    assert!(gap[0] < 0.0 && *gap.last().unwrap() > 0.0);
}
