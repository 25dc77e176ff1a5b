//! Text formats.
//!
//! * Point set: a header line `d N`, then `N` lines of `d` coordinates.
//! * Polytope: a header line `d m`, then `m` lines `n₁ … n_d b` describing
//!   the halfspaces `n·x ≤ b`.
//! * Trajectory: CSV with columns `t,x1..xd,action_density,slope_sq,class_id`.
//!
//! Blank lines and lines starting with `#` are ignored in the first two.

use std::io::{Read, Write};

use crate::action::node_states;
use crate::action::{Path, Shape};
use crate::geometry::{PointSet, Polytope};
use crate::linalg::dist2;
use crate::{Error, Result};

/// Relative tolerance on the spacing of the time column.
const TIME_GRID_TOL: f64 = 1e-6;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_numbers(line: usize, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|tok| {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("not a number: {tok:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(line, format!("not finite: {tok:?}")))
            }
        })
        .collect()
}

fn parse_header(line: usize, s: &str) -> Result<(usize, usize)> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let [a, b] = toks[..] else {
        return Err(Error::parse(line, "header must contain two integers"));
    };
    let a = a
        .parse()
        .map_err(|_| Error::parse(line, format!("bad dimension {a:?}")))?;
    let b = b
        .parse()
        .map_err(|_| Error::parse(line, format!("bad count {b:?}")))?;
    Ok((a, b))
}

fn parse_rows(text: &str, width: impl Fn(usize) -> usize) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let (d, n) = parse_header(hline, header)?;
    if d == 0 || d > crate::geometry::MAX_DIM {
        return Err(Error::parse(hline, format!("dimension {d} out of range")));
    }
    let mut rows = Vec::with_capacity(n.min(1 << 16));
    let mut last = hline;
    for (line, s) in lines {
        if rows.len() == n {
            return Err(Error::parse(line, format!("more than {n} rows")));
        }
        let row = parse_numbers(line, s)?;
        if row.len() != width(d) {
            return Err(Error::parse(
                line,
                format!("expected {} values, found {}", width(d), row.len()),
            ));
        }
        rows.push(row);
        last = line;
    }
    if rows.len() != n {
        return Err(Error::parse(
            last,
            format!("expected {n} rows, found {}", rows.len()),
        ));
    }
    Ok((d, rows))
}

pub fn parse_point_set(text: &str) -> Result<PointSet> {
    let (_, rows) = parse_rows(text, |d| d)?;
    PointSet::new(rows)
}

pub fn format_point_set(k: &PointSet) -> String {
    let mut out = format!("{} {}\n", k.dim(), k.len());
    for p in k.points() {
        let row: Vec<String> = p.iter().map(|c| format!("{c:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_polytope(text: &str) -> Result<Polytope> {
    let (d, rows) = parse_rows(text, |d| d + 1)?;
    let raw = rows
        .into_iter()
        .map(|mut r| {
            let b = r.pop().expect("row has d + 1 entries");
            (r, b)
        })
        .collect();
    Polytope::new(d, raw)
}

pub fn read_point_set(path: &std::path::Path) -> Result<PointSet> {
    parse_point_set(&std::fs::read_to_string(path)?)
}

pub fn read_polytope(path: &std::path::Path) -> Result<Polytope> {
    parse_polytope(&std::fs::read_to_string(path)?)
}

/// Per-node columns of a trajectory file.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub path: Path,
    /// `|γ̇|² + h(|∇f_K|²)` with the forward difference (backward at the
    /// last node).
    pub action_density: Vec<f64>,
    pub slope_sq: Vec<f64>,
    pub class_id: Vec<String>,
}

impl Trajectory {
    pub fn from_path(path: &Path, k: &PointSet, h: Shape) -> Result<Self> {
        k.check_dim(path.start())?;
        h.validate()?;
        let states = node_states(k, path.nodes())?;
        let m = path.intervals();
        let dt = path.dt();
        let speed_sq = |j: usize| dist2(path.node(j), path.node(j + 1)) / (dt * dt);
        let action_density = (0..=m)
            .map(|j| speed_sq(j.min(m - 1)) + h.eval(states[j].slope_sq))
            .collect();
        Ok(Self {
            path: path.clone(),
            action_density,
            slope_sq: states.iter().map(|s| s.slope_sq).collect(),
            class_id: states
                .iter()
                .map(|s| {
                    s.class
                        .iter()
                        .map(|i| i.to_string())
                        .collect::<Vec<_>>()
                        .join("+")
                })
                .collect(),
        })
    }
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = traj.path.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.extend(["action_density", "slope_sq", "class_id"].map(String::from));
    w.write_record(&header)?;
    for (j, x) in traj.path.nodes().iter().enumerate() {
        let mut rec = vec![format!("{:?}", traj.path.time(j))];
        rec.extend(x.iter().map(|c| format!("{c:?}")));
        rec.push(format!("{:?}", traj.action_density[j]));
        rec.push(format!("{:?}", traj.slope_sq[j]));
        rec.push(traj.class_id[j].clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory CSV. The time column must start at 0 and be uniformly
/// spaced; `delta` is taken from its last entry.
pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    let d = n.checked_sub(4).filter(|&d| d >= 1).ok_or_else(|| {
        Error::parse(
            1,
            "trajectory needs t, at least one coordinate and 3 trailing columns",
        )
    })?;
    let mut expected = vec!["t".to_string()];
    expected.extend((1..=d).map(|i| format!("x{i}")));
    expected.extend(["action_density", "slope_sq", "class_id"].map(String::from));
    if cols != expected {
        return Err(Error::parse(
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let mut times = Vec::new();
    let mut nodes = Vec::new();
    let mut action_density = Vec::new();
    let mut slope_sq = Vec::new();
    let mut class_id = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != n {
            return Err(Error::parse(
                line,
                format!("expected {n} fields, found {}", rec.len()),
            ));
        }
        let num = |j: usize| -> Result<f64> {
            let v: f64 = rec[j]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("not a number: {:?}", &rec[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(line, "non-finite value"))
            }
        };
        times.push(num(0)?);
        nodes.push((1..=d).map(num).collect::<Result<Vec<f64>>>()?);
        action_density.push(num(d + 1)?);
        slope_sq.push(num(d + 2)?);
        class_id.push(rec[d + 3].to_string());
    }
    if times.len() < 2 {
        return Err(Error::parse(1, "trajectory needs at least two rows"));
    }
    let delta = *times.last().expect("nonempty");
    if !(delta > 0.0) {
        return Err(Error::parse(times.len() + 1, "final time must be positive"));
    }
    let m = times.len() - 1;
    for (j, t) in times.iter().enumerate() {
        let want = delta * j as f64 / m as f64;
        if (t - want).abs() > TIME_GRID_TOL * delta {
            return Err(Error::parse(
                j + 2,
                format!("time {t} is off the uniform grid"),
            ));
        }
    }
    Ok(Trajectory {
        path: Path::new(delta, nodes)?,
        action_density,
        slope_sq,
        class_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_set_round_trip() {
        let k = parse_point_set("# two points\n2 2\n1 0\n\n0 1.5\n").unwrap();
        assert_eq!(k.points(), &[vec![1.0, 0.0], vec![0.0, 1.5]]);
        let again = parse_point_set(&format_point_set(&k)).unwrap();
        assert_eq!(again.points(), k.points());
    }

    #[test]
    fn point_set_errors_carry_lines() {
        let e = parse_point_set("2 2\n1 0\n0 x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(matches!(
            parse_point_set("2 3\n1 0\n0 1\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_point_set("2 1\n1 0 3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_point_set(""), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_point_set("0 1\n\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn polytope_square() {
        let p = parse_polytope("2 4\n1 0 1\n-1 0 1\n0 1 1\n0 -1 1\n").unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert!(p.contains(&[0.5, -0.5], 0.0));
    }

    #[test]
    fn trajectory_round_trip() {
        let k = PointSet::new(vec![vec![-1.0], vec![1.0]]).unwrap();
        let path = Path::straight(&[-0.5], &[0.5], 2.0, 8).unwrap();
        let t = Trajectory::from_path(&path, &k, Shape::Identity).unwrap();
        assert_eq!(t.class_id[4], "0+1");
        assert!((t.action_density[0] - (0.25 + 0.25)).abs() < 1e-12);
        let mut buf = Vec::new();
        write_trajectory(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x1,action_density,slope_sq,class_id\n"));
        let back = read_trajectory(&buf[..]).unwrap();
        assert_eq!(back.path.nodes(), path.nodes());
        assert_eq!(back.path.delta(), 2.0);
        assert_eq!(back.class_id, t.class_id);
    }

    #[test]
    fn trajectory_rejects_uneven_time() {
        let csv = "t,x1,action_density,slope_sq,class_id\n0,0,0,0,0\n0.3,0,0,0,0\n1,0,0,0,0\n";
        assert!(matches!(
            read_trajectory(csv.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }
}
