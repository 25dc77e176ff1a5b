use std::path::Path as FsPath;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use shockpath::action::{
    dp_oracle, evaluate_action, minimize, DpResult, GridSpec, Path, Shape, SolveResult, StartRecord,
};
use shockpath::analysis::{
    detect_shocks, jump_residual, regularity_report, JumpCheck, RegularityReport, ShockCounts,
    ShockKind, SECOND_DIFF_SLACK,
};
use shockpath::geometry::PointSet;
use shockpath::io::read_point_set;
use shockpath::mag::{build_mag, solve_mag, stability_run, window_certificate, MagSystem};

use crate::config::{
    Checks, Expectations, OracleConfig, PointSource, RunConfig, StabilityConfig, Target,
};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
        }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= bound,
            value,
            bound,
        }
    }

    fn equals(name: &str, value: usize, want: usize) -> Self {
        Self {
            name: name.into(),
            passed: value == want,
            value: value as f64,
            bound: want as f64,
        }
    }

    fn near(name: &str, value: f64, t: Target) -> Self {
        Self {
            name: name.into(),
            passed: t.holds(value),
            value,
            bound: t.value,
        }
    }

    fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            value: ok as u8 as f64,
            bound: 1.0,
        }
    }
}

/// Point set built from a [`PointSource`]; `mag` is set for lifted systems.
pub struct LoadedPoints {
    pub k: PointSet,
    pub mag: Option<MagSystem>,
}

pub fn load_points(source: &PointSource, base: &FsPath) -> Result<LoadedPoints> {
    Ok(match source {
        PointSource::Inline { points } => LoadedPoints {
            k: PointSet::new(points.clone())?,
            mag: None,
        },
        PointSource::File { path } => {
            let p = if path.is_absolute() {
                path.clone()
            } else {
                base.join(path)
            };
            LoadedPoints {
                k: read_point_set(&p).with_context(|| format!("loading {}", p.display()))?,
                mag: None,
            }
        }
        PointSource::Mag {
            n,
            m,
            base_points,
            window,
        } => {
            let sys = build_mag(base_points, *n, *m, window.unwrap_or(1))?;
            LoadedPoints {
                k: sys.k.clone(),
                mag: Some(sys),
            }
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionSummary {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub intervals: usize,
    pub action: f64,
    pub converged: bool,
    pub residual: f64,
    pub shocks: ShockCounts,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub dim: usize,
    pub points: usize,
    pub delta: f64,
    pub intervals: usize,
    pub converged: bool,
    pub residual: f64,
    pub action: ActionSummary,
    pub stages: Vec<StageSummary>,
    pub starts: Vec<StartRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    pub constant: f64,
    pub std_away_from_shocks: f64,
    pub intervals_checked: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SecondDiffSummary {
    pub nodes_checked: usize,
    pub violations: usize,
    pub max_excess: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpEntry {
    pub node_index: usize,
    pub time: f64,
    pub kind: ShockKind,
    pub jump_sq: f64,
    #[serde(flatten)]
    pub check: JumpCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisSummary {
    pub window: usize,
    pub energy: EnergySummary,
    pub second_differences: SecondDiffSummary,
    pub shocks: ShockCounts,
    pub jumps: Vec<JumpEntry>,
    pub momentum_residuals: Vec<f64>,
}

pub fn energy_tolerance(dt: f64) -> f64 {
    (5.0 * dt).max(1e-3)
}

pub fn jump_tolerance(dt: f64) -> f64 {
    (10.0 * dt).max(1e-2)
}

pub fn analyze(
    path: &Path,
    k: &PointSet,
    h: Shape,
    window: usize,
) -> Result<(AnalysisSummary, RegularityReport)> {
    let rep = regularity_report(path, k, h, window)?;
    let dt = path.dt();
    let jumps = rep
        .events
        .iter()
        .filter(|e| e.kind.is_effective())
        .map(|e| {
            Ok(JumpEntry {
                node_index: e.node_index,
                time: e.time,
                kind: e.kind,
                jump_sq: e.jump_sq,
                check: jump_residual(e, h)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = AnalysisSummary {
        window,
        energy: EnergySummary {
            constant: rep.energy_constant,
            std_away_from_shocks: rep.energy_std_away_from_shocks,
            intervals_checked: rep.energy_intervals_checked,
            tolerance: energy_tolerance(dt),
        },
        second_differences: SecondDiffSummary {
            nodes_checked: rep.second_diff_nodes_checked,
            violations: rep.second_diff_violations.len(),
            max_excess: rep.max_second_diff_excess,
            slack: SECOND_DIFF_SLACK * dt,
        },
        shocks: rep.shock_count_by_kind,
        jumps,
        momentum_residuals: rep.momentum_residuals.clone(),
    };
    Ok((summary, rep))
}

/// Invariant checks that apply to every path.
pub fn invariant_checks(a: &AnalysisSummary, dt: f64, checks: &Checks) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if checks.energy {
        out.push(CheckResult::at_most(
            "energy_constancy",
            a.energy.std_away_from_shocks,
            a.energy.tolerance,
        ));
    }
    if checks.regularity {
        out.push(CheckResult::equals(
            "second_difference_bound",
            a.second_differences.violations,
            0,
        ));
    }
    if checks.jump_identity && !a.jumps.is_empty() {
        let worst = a
            .jumps
            .iter()
            .map(|j| {
                let dec = if j.kind == ShockKind::EffectiveLeft {
                    j.check.decomposition_residual
                } else {
                    0.0
                };
                j.check.residual.max(dec)
            })
            .fold(0.0, f64::max);
        out.push(CheckResult::at_most(
            "jump_identity",
            worst,
            jump_tolerance(dt),
        ));
    }
    if checks.momentum && !a.momentum_residuals.is_empty() {
        let worst = a.momentum_residuals.iter().copied().fold(0.0, f64::max);
        out.push(CheckResult::at_most("projected_momentum", worst, 5.0 * dt));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct MagSummary {
    pub n: usize,
    pub m: usize,
    pub window: usize,
    pub points: usize,
    pub certificate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSummary {
    pub resolution: f64,
    pub slices: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Cost of the optimal grid path.
    pub cost: f64,
    /// Action of that path with its endpoints moved to the exact ones.
    pub path_action: f64,
    /// `|solver − cost| / cost`, absent in oracle-only runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub solve: SolveSummary,
    pub analysis: AnalysisSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mag: Option<MagSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub struct Solved {
    pub k: PointSet,
    pub mag: Option<MagSystem>,
    pub result: SolveResult,
}

pub struct OracleOutcome {
    pub summary: OracleSummary,
    pub dp: DpResult,
}

pub struct RunOutcome {
    pub config: RunConfig,
    pub k: PointSet,
    pub mag: Option<MagSystem>,
    pub result: SolveResult,
    pub regularity: RegularityReport,
    pub oracle: Option<OracleOutcome>,
    pub report: RunReport,
}

/// Minimization only. For MAG sources without a fixed window the window is
/// grown until the certificate holds; with a fixed window a failed
/// certificate is an error.
pub fn solve(cfg: &RunConfig, base: &FsPath) -> Result<Solved> {
    cfg.validate()?;
    if let PointSource::Mag {
        n,
        m,
        base_points,
        window: None,
    } = &cfg.points
    {
        let run = solve_mag(
            base_points,
            *n,
            *m,
            &cfg.x0,
            &cfg.xdelta,
            cfg.delta,
            cfg.shape,
            &cfg.solver,
        )?;
        return Ok(Solved {
            k: run.system.k.clone(),
            mag: Some(run.system),
            result: run.result,
        });
    }
    let loaded = load_points(&cfg.points, base)?;
    let result = minimize(
        &cfg.x0,
        &cfg.xdelta,
        cfg.delta,
        &loaded.k,
        cfg.shape,
        &cfg.solver,
    )?;
    if let Some(sys) = &loaded.mag {
        if !window_certificate(sys, &result.path)? {
            bail!(
                "window certificate failed at W = {}; raise the window",
                sys.window
            );
        }
    }
    Ok(Solved {
        k: loaded.k,
        mag: loaded.mag,
        result,
    })
}

pub fn solve_summary(k: &PointSet, result: &SolveResult, window: usize) -> Result<SolveSummary> {
    let stages = result
        .stages
        .iter()
        .map(|s| {
            let shocks = if s.path.intervals() > 2 * window {
                ShockCounts::from_events(&detect_shocks(&s.path, k, window)?)
            } else {
                ShockCounts::default()
            };
            Ok(StageSummary {
                intervals: s.intervals,
                action: s.action,
                converged: s.converged,
                residual: s.residual,
                shocks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolveSummary {
        dim: k.dim(),
        points: k.len(),
        delta: result.path.delta(),
        intervals: result.path.intervals(),
        converged: result.converged,
        residual: result.residual,
        action: ActionSummary {
            kinetic: result.breakdown.kinetic,
            potential: result.breakdown.potential,
            total: result.breakdown.total,
        },
        stages,
        starts: result.starts.clone(),
    })
}

/// Default oracle box: endpoints and their nearest points of `K`, padded
/// by a tenth of the extent plus two grid cells.
pub fn oracle_grid(cfg: &RunConfig, k: &PointSet, o: &OracleConfig) -> GridSpec {
    if let (Some(lo), Some(hi)) = (&o.lo, &o.hi) {
        return GridSpec {
            lo: lo.clone(),
            hi: hi.clone(),
            resolution: o.resolution,
            slices: o.slices,
        };
    }
    let nearest = |x: &[f64]| -> Vec<f64> {
        k.points()
            .iter()
            .min_by(|a, b| {
                shockpath::linalg::dist2(a, x).total_cmp(&shockpath::linalg::dist2(b, x))
            })
            .expect("nonempty point set")
            .clone()
    };
    let anchors = [
        cfg.x0.clone(),
        cfg.xdelta.clone(),
        nearest(&cfg.x0),
        nearest(&cfg.xdelta),
    ];
    let d = cfg.x0.len();
    let mut lo: Vec<f64> = (0..d)
        .map(|i| anchors.iter().map(|a| a[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut hi: Vec<f64> = (0..d)
        .map(|i| {
            anchors
                .iter()
                .map(|a| a[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let extent = (0..d).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let pad = 0.1 * extent + 2.0 * o.resolution;
    for i in 0..d {
        lo[i] -= pad;
        hi[i] += pad;
    }
    GridSpec {
        lo,
        hi,
        resolution: o.resolution,
        slices: o.slices,
    }
}

pub fn run_oracle(cfg: &RunConfig, k: &PointSet, o: &OracleConfig) -> Result<OracleOutcome> {
    ensure!(k.dim() <= 3, "the grid oracle needs d ≤ 3");
    let grid = oracle_grid(cfg, k, o);
    let dp = dp_oracle(&cfg.x0, &cfg.xdelta, cfg.delta, k, cfg.shape, &grid)?;
    let path_action = evaluate_action(&dp.path, k, cfg.shape)?.total;
    Ok(OracleOutcome {
        summary: OracleSummary {
            resolution: grid.resolution,
            slices: grid.slices,
            lo: grid.lo,
            hi: grid.hi,
            cost: dp.cost,
            path_action,
            rel_gap: None,
        },
        dp,
    })
}

fn expectation_checks(
    e: &Expectations,
    result: &SolveResult,
    summary: &SolveSummary,
    rep: &RegularityReport,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let counts = rep.shock_count_by_kind;
    if let Some(t) = e.action {
        out.push(CheckResult::near("action", result.breakdown.total, t));
    }
    if let Some(n) = e.total_shocks {
        out.push(CheckResult::equals("total_shocks", counts.total, n));
    }
    if let Some(n) = e.nondegenerate_shocks {
        out.push(CheckResult::equals(
            "nondegenerate_shocks",
            counts.nondegenerate,
            n,
        ));
    }
    let effective = counts.effective_left + counts.effective_right;
    if let Some(n) = e.effective_shocks {
        out.push(CheckResult::equals("effective_shocks", effective, n));
    }
    if let Some(n) = e.min_effective_shocks {
        out.push(CheckResult::at_least(
            "min_effective_shocks",
            effective as f64,
            n as f64,
        ));
    }
    if let Some(kind) = e.first_event_kind {
        let ok = rep.events.first().is_some_and(|ev| ev.kind == kind);
        out.push(CheckResult::flag(
            &format!("first_event_is_{}", kind_name(kind)),
            ok,
        ));
    }
    if let Some(t) = e.first_shock_time {
        let v = rep.events.first().map_or(f64::NAN, |ev| ev.time);
        out.push(CheckResult::near("first_shock_time", v, t));
    }
    if let Some(min) = e.min_waiting_interval {
        let times: Vec<f64> = rep
            .events
            .iter()
            .filter(|ev| ev.kind.is_effective())
            .map(|ev| ev.time)
            .collect();
        let span = match (times.first(), times.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        };
        out.push(CheckResult::at_least("waiting_interval", span, min));
    }
    if let Some(min) = e.min_jump_sq {
        let v = rep
            .events
            .iter()
            .filter(|ev| ev.kind.is_effective())
            .map(|ev| ev.jump_sq)
            .fold(f64::INFINITY, f64::min);
        let v = if v.is_finite() { v } else { f64::NAN };
        out.push(CheckResult {
            name: "min_jump_sq".into(),
            passed: v >= min,
            value: v,
            bound: min,
        });
    }
    if let Some(cb) = e.max_abs_coordinate {
        let v = result
            .path
            .nodes()
            .iter()
            .map(|x| x.get(cb.index).map_or(f64::NAN, |c| c.abs()))
            .fold(0.0, f64::max);
        out.push(CheckResult::at_most(
            &format!("max_abs_x{}", cb.index + 1),
            v,
            cb.bound,
        ));
    }
    if e.counts_stable {
        let n = summary.stages.len();
        let ok = n >= 2 && summary.stages[n - 1].shocks == summary.stages[n - 2].shocks;
        out.push(CheckResult::flag("shock_counts_stable", ok));
    }
    out
}

fn kind_name(k: ShockKind) -> &'static str {
    match k {
        ShockKind::Degenerate => "degenerate",
        ShockKind::Nondegenerate => "nondegenerate",
        ShockKind::EffectiveLeft => "effective_left",
        ShockKind::EffectiveRight => "effective_right",
    }
}

/// Solve, analyze, optionally cross-check against the oracle, and evaluate
/// every check.
pub fn execute(cfg: &RunConfig, base: &FsPath) -> Result<RunOutcome> {
    let solved = solve(cfg, base)?;
    let Solved { k, mag, result } = solved;
    let window = cfg.analysis.window;
    let solve_sum = solve_summary(&k, &result, window)?;
    let (analysis, regularity) = analyze(&result.path, &k, cfg.shape, window)?;
    let dt = result.path.dt();

    let mut checks = vec![CheckResult::flag("converged", result.converged)];
    checks.extend(invariant_checks(&analysis, dt, &cfg.checks));
    if cfg.checks.refinement && solve_sum.stages.len() >= 2 {
        let n = solve_sum.stages.len();
        let (a, b) = (
            solve_sum.stages[n - 2].action,
            solve_sum.stages[n - 1].action,
        );
        checks.push(CheckResult::at_most(
            "refinement_stability",
            (b - a).abs(),
            0.01 * a.abs() + 1e-12,
        ));
    }
    checks.extend(expectation_checks(
        &cfg.expect,
        &result,
        &solve_sum,
        &regularity,
    ));

    let mag_summary = match &mag {
        Some(sys) => {
            let cert = window_certificate(sys, &result.path)?;
            checks.push(CheckResult::flag("window_certificate", cert));
            Some(MagSummary {
                n: sys.n,
                m: sys.m,
                window: sys.window,
                points: sys.k.len(),
                certificate: cert,
            })
        }
        None => None,
    };

    let oracle = match &cfg.oracle {
        Some(o) => {
            let mut out = run_oracle(cfg, &k, o)?;
            let gap = (result.breakdown.total - out.summary.cost).abs()
                / out.summary.cost.abs().max(1e-300);
            out.summary.rel_gap = Some(gap);
            if let Some(max) = o.max_rel_gap {
                checks.push(CheckResult::at_most("oracle_rel_gap", gap, max));
            }
            Some(out)
        }
        None => None,
    };

    let passed = checks.iter().all(|c| c.passed);
    let report = RunReport {
        name: cfg.name.clone(),
        solve: solve_sum,
        analysis,
        mag: mag_summary,
        oracle: oracle.as_ref().map(|o| o.summary.clone()),
        checks,
        passed,
    };
    Ok(RunOutcome {
        config: cfg.clone(),
        k,
        mag,
        result,
        regularity,
        oracle,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityEntry {
    pub label: String,
    pub action: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub name: String,
    pub entries: Vec<StabilityEntry>,
    /// `action[j+1] − action[j]`.
    pub differences: Vec<f64>,
    pub monotone: bool,
    pub contracting: bool,
    pub final_gap: f64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub fn run_stability(cfg: &StabilityConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let sets = cfg
        .cases
        .iter()
        .map(|c| PointSet::new(c.points.clone()))
        .collect::<shockpath::Result<Vec<_>>>()?;
    let endpoints: Vec<(Vec<f64>, Vec<f64>)> = cfg
        .cases
        .iter()
        .map(|c| (c.x0.clone(), c.xdelta.clone()))
        .collect();
    let actions = stability_run(&sets, &endpoints, cfg.delta, cfg.shape, &cfg.solver)?;
    let entries: Vec<StabilityEntry> = cfg
        .cases
        .iter()
        .zip(&actions)
        .map(|(c, &a)| StabilityEntry {
            label: c.label.clone(),
            action: a,
            reference: c.reference,
            rel_error: c.reference.map(|r| (a - r).abs() / r.abs().max(1e-300)),
        })
        .collect();
    let differences: Vec<f64> = actions.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = differences.iter().all(|&d| d >= 0.0) || differences.iter().all(|&d| d <= 0.0);
    let contracting = differences.windows(2).all(|w| w[1].abs() <= w[0].abs());
    let final_gap = differences.last().map_or(0.0, |d| d.abs());

    let e = &cfg.expect;
    let mut checks = Vec::new();
    if e.monotone {
        checks.push(CheckResult::flag("monotone", monotone));
    }
    if e.contracting {
        checks.push(CheckResult::flag("contracting", contracting));
    }
    if let Some(g) = e.final_gap {
        checks.push(CheckResult::at_most("final_gap", final_gap, g));
    }
    if let Some(tol) = e.reference_rel_tol {
        let worst = entries
            .iter()
            .filter_map(|x| x.rel_error)
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most("reference_rel_error", worst, tol));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(StabilityReport {
        name: cfg.name.clone(),
        entries,
        differences,
        monotone,
        contracting,
        final_gap,
        checks,
        passed,
    })
}
