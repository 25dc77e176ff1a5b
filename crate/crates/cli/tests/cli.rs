use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn shockpath(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shockpath"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn preset_run_writes_artifacts_and_passes() {
    let dir = tempdir().unwrap();
    let out = shockpath(&["preset", "example1-c02", "--out", "c02"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let run = dir.path().join("c02");
    for f in [
        "config.toml",
        "trajectory.csv",
        "events.json",
        "report.json",
        "position.svg",
        "energy.svg",
        "slope_sq.svg",
        "oracle_trajectory.csv",
    ] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let report = json(&run.join("report.json"));
    assert_eq!(report["passed"], Value::Bool(true));
    let events = json(&run.join("events.json"));
    let kinds: Vec<&str> = events
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["effective_left", "effective_right"]);
    let header = fs::read_to_string(run.join("trajectory.csv")).unwrap();
    assert!(header.starts_with("t,x1,action_density,slope_sq,class_id\n"));
}

#[test]
fn runs_are_reproducible() {
    let dir = tempdir().unwrap();
    for name in ["a", "b"] {
        let out = shockpath(&["preset", "example2", "--out", name], dir.path());
        assert_eq!(out.status.code(), Some(0));
    }
    for f in [
        "trajectory.csv",
        "events.json",
        "report.json",
        "position.svg",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn printed_preset_runs_from_a_file() {
    let dir = tempdir().unwrap();
    let out = shockpath(&["preset", "example1-c1", "--print"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    fs::write(dir.path().join("c1.toml"), &out.stdout).unwrap();
    let out = shockpath(&["run", "c1.toml"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    assert!(dir.path().join("runs/example1-c1/report.json").is_file());
}

#[test]
fn invalid_config_is_a_structured_error() {
    let dir = tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "name = \"x\"\nx0 = [0.0]\nxdelta = [1.0]\nbogus = 1\n[points]\nsource = \"inline\"\npoints = [[-1.0], [1.0]]\n",
    )
    .unwrap();
    let out = shockpath(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "error");

    let out = shockpath(&["preset", "no-such-preset"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_then_analyze() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("k.txt"), "1 2\n-1\n1\n").unwrap();
    let out = shockpath(
        &[
            "solve", "--points", "k.txt", "--x0", "-0.2", "--xdelta", "0.2", "--out", "s",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = json(&dir.path().join("s/summary.json"));
    let action = summary["action"]["total"].as_f64().unwrap();
    assert!((action - 0.72).abs() < 0.01, "{action}");

    let out = shockpath(
        &[
            "analyze",
            "--trajectory",
            "s/trajectory.csv",
            "--points",
            "k.txt",
            "--out",
            "a",
            "--svg",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let events = json(&dir.path().join("a/events.json"));
    assert_eq!(events.as_array().unwrap().len(), 2);
    assert!(dir.path().join("a/energy.svg").is_file());
}

#[test]
fn zones_reports_the_unbalanced_witness() {
    let dir = tempdir().unwrap();
    fs::write(dir.path().join("k.txt"), "2 3\n1 0\n0 1\n-1 0\n").unwrap();
    let out = shockpath(&["zones", "--points", "k.txt"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let table: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(table["balanced"], Value::Bool(false));
    assert!(table["witness"].is_array());
    assert!(table["witnessed_cells"].as_u64().unwrap() >= 6);
    assert!(String::from_utf8_lossy(&out.stderr).contains("witnessed cells"));
}

#[test]
fn mag_command_writes_particle_tracks() {
    let dir = tempdir().unwrap();
    let out = shockpath(
        &[
            "mag",
            "--base",
            "0;0.5",
            "--n",
            "1",
            "--m",
            "2",
            "--x0",
            "0.2,0.3",
            "--xdelta",
            "0.35,0.25",
            "--out",
            "m",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let p1 = fs::read_to_string(dir.path().join("m/particle_1.csv")).unwrap();
    assert!(p1.starts_with("t,y1,theta1\n"));
    assert!(dir.path().join("m/particle_2.csv").is_file());
}

#[test]
fn oracle_command_uses_the_config_grid() {
    let dir = tempdir().unwrap();
    let out = shockpath(&["preset", "example1-c02", "--print"], dir.path());
    fs::write(dir.path().join("c02.toml"), &out.stdout).unwrap();
    let out = shockpath(
        &[
            "oracle",
            "c02.toml",
            "--out",
            "o",
            "--resolution",
            "0.02",
            "--slices",
            "50",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let o = json(&dir.path().join("o/oracle.json"));
    assert!(o["cost"].as_f64().unwrap() > 0.6);
    assert!(dir.path().join("o/oracle_trajectory.csv").is_file());
}

#[test]
fn failing_checks_exit_with_one() {
    let dir = tempdir().unwrap();
    let out = shockpath(&["preset", "stability-hausdorff", "--print"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    // A gap bound no finite family meets.
    let cfg = text.replace("final_gap = 0.01", "final_gap = 1e-9");
    fs::write(dir.path().join("h.toml"), cfg).unwrap();
    let out = shockpath(&["stability", "h.toml", "--out", "h"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&dir.path().join("h/stability.json"));
    assert_eq!(rep["passed"], Value::Bool(false));
}
