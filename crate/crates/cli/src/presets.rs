//! Built-in scenarios. Each maps to one acceptance criterion.

use shockpath::action::{Shape, SolverConfig};
use shockpath::analysis::ShockKind;

use crate::config::{
    AnalysisConfig, Checks, CoordinateBound, Expectations, OracleConfig, PointSource, RunConfig,
    StabilityCase, StabilityConfig, StabilityExpectations, Target,
};

pub enum Preset {
    Run(RunConfig),
    Stability(StabilityConfig),
}

pub const RUN_PRESETS: [&str; 4] = ["example1-c1", "example1-c02", "example2", "mag-collision"];
pub const STABILITY_PRESETS: [&str; 2] = ["stability-hausdorff", "stability-shrink"];

pub fn names() -> Vec<&'static str> {
    RUN_PRESETS
        .iter()
        .chain(&STABILITY_PRESETS)
        .copied()
        .collect()
}

pub fn preset(name: &str) -> Option<Preset> {
    Some(match name {
        "example1-c1" => Preset::Run(example1(name, 1.0)),
        "example1-c02" => Preset::Run(example1(name, 0.2)),
        "example2" => Preset::Run(example2()),
        "mag-collision" => Preset::Run(mag_collision()),
        "stability-hausdorff" => Preset::Stability(hausdorff()),
        "stability-shrink" => Preset::Stability(shrink()),
        _ => return None,
    })
}

fn base(name: &str, points: PointSource, x0: Vec<f64>, xdelta: Vec<f64>) -> RunConfig {
    RunConfig {
        name: name.into(),
        points,
        shape: Shape::Identity,
        x0,
        xdelta,
        delta: 1.0,
        output: None,
        solver: SolverConfig::default(),
        analysis: AnalysisConfig::default(),
        oracle: None,
        checks: Checks::default(),
        expect: Expectations::default(),
    }
}

fn pair() -> PointSource {
    PointSource::Inline {
        points: vec![vec![-1.0], vec![1.0]],
    }
}

/// `K = {−1, 1}`, endpoints `∓c`.
fn example1(name: &str, c: f64) -> RunConfig {
    let mut cfg = base(name, pair(), vec![-c], vec![c]);
    if c >= 0.5 {
        // Straight crossing of the bisector.
        cfg.expect = Expectations {
            total_shocks: Some(1),
            nondegenerate_shocks: Some(1),
            effective_shocks: Some(0),
            counts_stable: true,
            ..Default::default()
        };
    } else {
        // Arrive at 0, wait, leave: action 2c(2 − c), arrival at ln(1/(1 − c)).
        cfg.expect = Expectations {
            action: Some(Target {
                value: 2.0 * c * (2.0 - c),
                tol: 0.01,
            }),
            effective_shocks: Some(2),
            first_shock_time: Some(Target {
                value: (1.0 / (1.0 - c)).ln(),
                tol: 0.02,
            }),
            min_waiting_interval: Some(0.4),
            min_jump_sq: Some(1.0 - 1e-2),
            counts_stable: true,
            ..Default::default()
        };
        cfg.oracle = Some(OracleConfig {
            resolution: 0.01,
            slices: 100,
            lo: None,
            hi: None,
            max_rel_gap: Some(0.03),
        });
    }
    cfg
}

fn example2() -> RunConfig {
    let mut cfg = base(
        "example2",
        PointSource::Inline {
            points: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]],
        },
        vec![0.0, -1.0],
        vec![0.0, 0.0],
    );
    cfg.expect = Expectations {
        action: Some(Target {
            value: 1.0 / 1f64.tanh(),
            tol: 0.01,
        }),
        first_event_kind: Some(ShockKind::Degenerate),
        max_abs_coordinate: Some(CoordinateBound {
            index: 0,
            bound: 1e-4,
        }),
        ..Default::default()
    };
    cfg
}

/// Two particles on the circle with reference positions 0 and 1/2; the
/// first overtakes the second.
fn mag_collision() -> RunConfig {
    let mut cfg = base(
        "mag-collision",
        PointSource::Mag {
            n: 1,
            m: 2,
            base_points: vec![vec![0.0], vec![0.5]],
            window: None,
        },
        vec![0.2, 0.3],
        vec![0.35, 0.25],
    );
    cfg.expect = Expectations {
        min_effective_shocks: Some(1),
        ..Default::default()
    };
    cfg
}

fn waiting_action(c: f64, a: f64) -> f64 {
    2.0 * c * (2.0 * a - c)
}

/// `K_j = {−1 − 1/j, 1 + 1/j}` with the endpoints of the waiting branch.
fn hausdorff() -> StabilityConfig {
    let c = 0.2;
    StabilityConfig {
        name: "stability-hausdorff".into(),
        shape: Shape::Identity,
        delta: 1.0,
        output: None,
        solver: SolverConfig::default(),
        cases: [1, 2, 4, 8, 16]
            .iter()
            .map(|&j| {
                let a = 1.0 + 1.0 / j as f64;
                StabilityCase {
                    label: format!("j={j}"),
                    points: vec![vec![-a], vec![a]],
                    x0: vec![-c],
                    xdelta: vec![c],
                    reference: Some(waiting_action(c, a)),
                }
            })
            .collect(),
        expect: StabilityExpectations {
            monotone: true,
            contracting: true,
            final_gap: Some(1e-2),
            reference_rel_tol: None,
        },
    }
}

/// `Γ(−c, c)` on `K = {−1, 1}` for shrinking `c`.
fn shrink() -> StabilityConfig {
    StabilityConfig {
        name: "stability-shrink".into(),
        shape: Shape::Identity,
        delta: 1.0,
        output: None,
        solver: SolverConfig::default(),
        cases: [0.2, 0.1, 0.05]
            .iter()
            .map(|&c| StabilityCase {
                label: format!("c={c}"),
                points: vec![vec![-1.0], vec![1.0]],
                x0: vec![-c],
                xdelta: vec![c],
                reference: Some(waiting_action(c, 1.0)),
            })
            .collect(),
        expect: StabilityExpectations {
            monotone: true,
            contracting: true,
            final_gap: None,
            reference_rel_tol: Some(0.1),
        },
    }
}
