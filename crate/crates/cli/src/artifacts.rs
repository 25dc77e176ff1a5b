use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path as FsPath;

use anyhow::{Context, Result};
use serde::Serialize;
use shockpath::action::{Path, Shape};
use shockpath::analysis::RegularityReport;
use shockpath::geometry::PointSet;
use shockpath::io::{write_trajectory, Trajectory};
use shockpath::mag::{particle_paths, MagSystem};

use crate::runner::RunOutcome;
use crate::svg::{line_chart, Series};

pub fn write_json<T: Serialize>(path: &FsPath, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_trajectory_file(path: &FsPath, traj: &Trajectory) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_trajectory(traj, BufWriter::new(f))?;
    Ok(())
}

/// Position, energy and `slope_sq` charts.
pub fn write_plots(dir: &FsPath, traj: &Trajectory, rep: &RegularityReport) -> Result<()> {
    let path = &traj.path;
    let times: Vec<f64> = (0..=path.intervals()).map(|j| path.time(j)).collect();
    let position: Vec<Series> = (0..path.dim())
        .map(|i| Series {
            label: format!("x{}", i + 1),
            points: times
                .iter()
                .zip(path.nodes())
                .map(|(&t, x)| (t, x[i]))
                .collect(),
        })
        .collect();
    fs::write(
        dir.join("position.svg"),
        line_chart("Position", "t", "x", &position),
    )?;

    let dt = path.dt();
    let energy = vec![
        Series {
            label: "energy".into(),
            points: rep
                .energy_values
                .iter()
                .enumerate()
                .map(|(j, &e)| ((j as f64 + 0.5) * dt, e))
                .collect(),
        },
        Series {
            label: "median".into(),
            points: vec![
                (0.0, rep.energy_constant),
                (path.delta(), rep.energy_constant),
            ],
        },
    ];
    fs::write(
        dir.join("energy.svg"),
        line_chart("Energy", "t", "energy", &energy),
    )?;

    let slope = vec![Series {
        label: "slope_sq".into(),
        points: times
            .iter()
            .zip(&traj.slope_sq)
            .map(|(&t, &s)| (t, s))
            .collect(),
    }];
    fs::write(
        dir.join("slope_sq.svg"),
        line_chart("Squared slope", "t", "|∇f|²", &slope),
    )?;
    Ok(())
}

/// One CSV per particle: `t,y1..yn,theta1..thetan` with lifted and torus
/// coordinates.
pub fn write_particles(dir: &FsPath, sys: &MagSystem, path: &Path) -> Result<()> {
    let pp = particle_paths(sys, path)?;
    for (i, (lifted, torus)) in pp.lifted.iter().zip(&pp.torus).enumerate() {
        let file = dir.join(format!("particle_{}.csv", i + 1));
        let mut text = String::from("t");
        for c in 1..=sys.n {
            text.push_str(&format!(",y{c}"));
        }
        for c in 1..=sys.n {
            text.push_str(&format!(",theta{c}"));
        }
        text.push('\n');
        for (j, (y, th)) in lifted.iter().zip(torus).enumerate() {
            text.push_str(&format!("{:?}", path.time(j)));
            for v in y.iter().chain(th) {
                text.push_str(&format!(",{v:?}"));
            }
            text.push('\n');
        }
        fs::write(&file, text).with_context(|| format!("writing {}", file.display()))?;
    }
    Ok(())
}

pub fn write_run(dir: &FsPath, out: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.toml"), out.config.to_toml()?)?;
    let traj = Trajectory::from_path(&out.result.path, &out.k, out.config.shape)?;
    write_trajectory_file(&dir.join("trajectory.csv"), &traj)?;
    write_json(&dir.join("events.json"), &out.regularity.events)?;
    write_json(&dir.join("report.json"), &out.report)?;
    if out.config.analysis.svg {
        write_plots(dir, &traj, &out.regularity)?;
    }
    if let Some(sys) = &out.mag {
        write_particles(dir, sys, &out.result.path)?;
    }
    if let Some(o) = &out.oracle {
        let t = Trajectory::from_path(&o.dp.path, &out.k, out.config.shape)?;
        write_trajectory_file(&dir.join("oracle_trajectory.csv"), &t)?;
    }
    Ok(())
}

/// Trajectory of an arbitrary path, for the `solve` and `oracle` commands.
pub fn write_path(file: &FsPath, path: &Path, k: &PointSet, h: Shape) -> Result<()> {
    write_trajectory_file(file, &Trajectory::from_path(path, k, h)?)
}

#[derive(Serialize)]
struct Failure {
    status: &'static str,
    error: String,
    causes: Vec<String>,
}

/// Machine-readable failure record.
pub fn failure_json(err: &anyhow::Error) -> String {
    let f = Failure {
        status: "error",
        error: err.to_string(),
        causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
    };
    serde_json::to_string(&f).expect("plain struct serializes")
}
