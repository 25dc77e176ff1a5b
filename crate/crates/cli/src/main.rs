use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use shockpath::action::{minimize, Shape, SolverConfig};
use shockpath::io::{read_point_set, read_trajectory};
use shockpath::potential::zone_table;

use shockpath_cli::artifacts::{failure_json, write_json, write_path, write_plots, write_run};
use shockpath_cli::config::{parse_point_list, PointSource, RunConfig, StabilityConfig};
use shockpath_cli::presets::{self, Preset};
use shockpath_cli::runner::{
    analyze, execute, invariant_checks, run_oracle, run_stability, solve_summary, CheckResult,
    RunOutcome, StabilityReport,
};

#[derive(Parser)]
#[command(name = "shockpath", version, about = "Least-action paths with shocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML experiment: solve, analyze, check, write artifacts.
    Run {
        config: PathBuf,
        /// Overrides the output directory of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in scenario, or print its config.
    Preset {
        /// Omit to list the presets.
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the preset as TOML instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Minimize the action and write the trajectory and a summary.
    Solve {
        /// Point set file (`d N` header).
        #[arg(long)]
        points: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        x0: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        xdelta: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// `identity`, `power:p` or `affine:a,b`.
        #[arg(long, default_value = "identity")]
        shape: String,
        /// TOML file with solver settings.
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Analyze a trajectory CSV against a point set.
    Analyze {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value = "identity")]
        shape: String,
        /// Minimum class-run length for shock detection.
        #[arg(long, default_value_t = 3)]
        window: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Run the grid dynamic-programming oracle for a run config.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the grid spacing; required when the config has no
        /// oracle section.
        #[arg(long)]
        resolution: Option<f64>,
        #[arg(long)]
        slices: Option<usize>,
    },
    /// Potential zones and the balancedness verdict of a point set.
    Zones {
        #[arg(long)]
        points: PathBuf,
        /// Probe box; defaults to the bounding box of the points padded by 1.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lo: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        hi: Option<Vec<f64>>,
        #[arg(long, default_value_t = 2000)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Particle system on the torus: `m` particles in dimension `n`.
    Mag {
        /// Reference positions, e.g. `0;0.5` or `0,0;0.5,0.5`.
        #[arg(long)]
        base: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Lifted start point, particle after particle.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        x0: Vec<f64>,
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        xdelta: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Fixed lattice window; grown automatically when absent.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Minimal actions over a family of point sets.
    Stability {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn print_checks(checks: &[CheckResult]) {
    for c in checks {
        println!(
            "{} {:<28} value={:<12.6e} bound={:.6e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
}

fn finish_run(out: &RunOutcome, dir: &Path) -> Result<bool> {
    write_run(dir, out)?;
    println!(
        "{}: action {:.6} over {} intervals, converged {}",
        out.report.name,
        out.report.solve.action.total,
        out.report.solve.intervals,
        out.report.solve.converged
    );
    print_checks(&out.report.checks);
    println!("artifacts in {}", dir.display());
    Ok(out.report.passed)
}

fn finish_stability(rep: &StabilityReport, dir: &Path) -> Result<bool> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("stability.json"), rep)?;
    for e in &rep.entries {
        println!("{:<10} action {:.6}", e.label, e.action);
    }
    print_checks(&rep.checks);
    println!("artifacts in {}", dir.display());
    Ok(rep.passed)
}

fn run_config(cfg: &RunConfig, base: &Path, out: Option<PathBuf>) -> Result<bool> {
    let dir = out.unwrap_or_else(|| cfg.output_dir(base));
    let outcome = execute(cfg, base)?;
    finish_run(&outcome, &dir)
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            run_config(&cfg, &config_dir(&config), out)
        }
        Command::Preset { name, out, print } => {
            let Some(name) = name else {
                for n in presets::names() {
                    println!("{n}");
                }
                return Ok(true);
            };
            let preset = presets::preset(&name).with_context(|| {
                format!(
                    "unknown preset {name:?}; available: {}",
                    presets::names().join(", ")
                )
            })?;
            match preset {
                Preset::Run(cfg) if print => print!("{}", cfg.to_toml()?),
                Preset::Stability(cfg) if print => print!("{}", cfg.to_toml()?),
                Preset::Run(cfg) => return run_config(&cfg, Path::new("."), out),
                Preset::Stability(cfg) => {
                    let dir = out.unwrap_or_else(|| cfg.output_dir(Path::new(".")));
                    return finish_stability(&run_stability(&cfg)?, &dir);
                }
            }
            Ok(true)
        }
        Command::Solve {
            points,
            x0,
            xdelta,
            delta,
            shape,
            solver,
            out,
        } => {
            let k =
                read_point_set(&points).with_context(|| format!("loading {}", points.display()))?;
            let h = Shape::parse(&shape)?;
            let cfg: SolverConfig = match solver {
                Some(p) => toml::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("invalid solver config {}", p.display()))?,
                None => SolverConfig::default(),
            };
            let result = minimize(&x0, &xdelta, delta, &k, h, &cfg)?;
            std::fs::create_dir_all(&out)?;
            write_path(&out.join("trajectory.csv"), &result.path, &k, h)?;
            let summary = solve_summary(&k, &result, 3)?;
            write_json(&out.join("summary.json"), &summary)?;
            println!(
                "action {:.6} over {} intervals, converged {}, residual {:.3e}",
                summary.action.total, summary.intervals, summary.converged, summary.residual
            );
            Ok(result.converged)
        }
        Command::Analyze {
            trajectory,
            points,
            shape,
            window,
            out,
            svg,
        } => {
            let k = read_point_set(&points)?;
            let h = Shape::parse(&shape)?;
            let file = File::open(&trajectory)
                .with_context(|| format!("opening {}", trajectory.display()))?;
            let traj = read_trajectory(file)?;
            let (summary, rep) = analyze(&traj.path, &k, h, window)?;
            let checks = invariant_checks(&summary, traj.path.dt(), &Default::default());
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("events.json"), &rep.events)?;
            write_json(
                &out.join("report.json"),
                &serde_json::json!({ "analysis": summary, "checks": checks }),
            )?;
            if svg {
                write_plots(&out, &traj, &rep)?;
            }
            print_checks(&checks);
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Oracle {
            config,
            out,
            resolution,
            slices,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            let base = config_dir(&config);
            let mut o = cfg
                .oracle
                .clone()
                .unwrap_or(shockpath_cli::config::OracleConfig {
                    resolution: resolution.unwrap_or(0.0),
                    slices: 100,
                    lo: None,
                    hi: None,
                    max_rel_gap: None,
                });
            if let Some(r) = resolution {
                o.resolution = r;
            }
            if let Some(s) = slices {
                o.slices = s;
            }
            ensure!(
                o.resolution > 0.0,
                "give --resolution or an [oracle] section"
            );
            cfg.oracle = Some(o.clone());
            cfg.validate()?;
            let loaded = shockpath_cli::runner::load_points(&cfg.points, &base)?;
            let res = run_oracle(&cfg, &loaded.k, &o)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir(&base));
            std::fs::create_dir_all(&dir)?;
            write_path(
                &dir.join("oracle_trajectory.csv"),
                &res.dp.path,
                &loaded.k,
                cfg.shape,
            )?;
            write_json(&dir.join("oracle.json"), &res.summary)?;
            println!(
                "oracle cost {:.6} (path action {:.6}) at resolution {} with {} slices",
                res.summary.cost, res.summary.path_action, o.resolution, o.slices
            );
            Ok(true)
        }
        Command::Zones {
            points,
            lo,
            hi,
            probes,
            seed,
            out,
        } => {
            let k = read_point_set(&points)?;
            let (lo, hi) = match (lo, hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                (None, None) => {
                    let d = k.dim();
                    let lo = (0..d)
                        .map(|i| {
                            k.points()
                                .iter()
                                .map(|p| p[i])
                                .fold(f64::INFINITY, f64::min)
                                - 1.0
                        })
                        .collect();
                    let hi = (0..d)
                        .map(|i| {
                            k.points()
                                .iter()
                                .map(|p| p[i])
                                .fold(f64::NEG_INFINITY, f64::max)
                                + 1.0
                        })
                        .collect();
                    (lo, hi)
                }
                _ => bail!("--lo and --hi must be given together"),
            };
            let table = zone_table(&k, (&lo, &hi), probes, seed)?;
            match out {
                Some(p) => write_json(&p, &table)?,
                None => println!("{}", serde_json::to_string_pretty(&table)?),
            }
            eprintln!(
                "{} zones, beta {:.6}, balanced {} on {} witnessed cells",
                table.etas.len(),
                table.beta,
                table.balanced,
                table.witnessed_cells
            );
            Ok(true)
        }
        Command::Mag {
            base,
            n,
            m,
            x0,
            xdelta,
            delta,
            window,
            out,
        } => {
            let cfg = RunConfig {
                name: "mag".into(),
                points: PointSource::Mag {
                    n,
                    m,
                    base_points: parse_point_list(&base)?,
                    window,
                },
                shape: Shape::Identity,
                x0,
                xdelta,
                delta,
                output: Some(out.clone()),
                solver: SolverConfig::default(),
                analysis: Default::default(),
                oracle: None,
                checks: Default::default(),
                expect: Default::default(),
            };
            run_config(&cfg, Path::new("."), Some(out))
        }
        Command::Stability { config, out } => {
            let cfg = StabilityConfig::load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir(&config_dir(&config)));
            finish_stability(&run_stability(&cfg)?, &dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", failure_json(&e));
            ExitCode::from(2)
        }
    }
}
