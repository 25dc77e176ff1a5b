use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use shockpath::action::{Shape, SolverConfig};
use shockpath::analysis::ShockKind;

/// One solve → analyze → report experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub points: PointSource,
    #[serde(default)]
    pub shape: Shape,
    pub x0: Vec<f64>,
    pub xdelta: Vec<f64>,
    pub delta: f64,
    /// Defaults to `runs/<name>` next to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub expect: Expectations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSource {
    Inline {
        points: Vec<Vec<f64>>,
    },
    /// `d N` text file, relative to the config file.
    File {
        path: PathBuf,
    },
    /// Lifted particle system; `window` is grown automatically when absent.
    Mag {
        n: usize,
        m: usize,
        base_points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Minimum class-run length, in nodes, for shock detection.
    pub window: usize,
    pub svg: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window: 3,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub resolution: f64,
    #[serde(default = "default_slices")]
    pub slices: usize,
    /// Grid box; defaults to the endpoints and their nearest points of `K`
    /// with a margin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    /// Largest accepted `|solver − oracle| / oracle` in a full run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rel_gap: Option<f64>,
}

fn default_slices() -> usize {
    100
}

/// Invariant checks applied to every run; each can be switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    /// Interval energies away from shocks: std ≤ max(1e-3, 5Δt).
    pub energy: bool,
    /// No second-difference violations.
    pub regularity: bool,
    /// Jump identity residual ≤ max(1e-2, 10Δt) at effective shocks.
    pub jump_identity: bool,
    /// Projected momentum residual ≤ 5Δt across nondegenerate shocks.
    pub momentum: bool,
    /// Action changes by at most 1% between the last two mesh stages.
    pub refinement: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            energy: true,
            regularity: true,
            jump_identity: true,
            momentum: true,
            refinement: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    pub tol: f64,
}

impl Target {
    pub fn holds(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinateBound {
    /// Zero-based coordinate index.
    pub index: usize,
    pub bound: f64,
}

/// Scenario-specific expectations; absent fields are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expectations {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<Target>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_shocks: Option<usize>,
    /// Counts effective shocks too.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nondegenerate_shocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_shocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_effective_shocks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_event_kind: Option<ShockKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_shock_time: Option<Target>,
    /// Lower bound on the time between the first and last effective shock.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_waiting_interval: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_jump_sq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_coordinate: Option<CoordinateBound>,
    /// Shock counts by kind agree on the last two mesh stages.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub counts_stable: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.name.trim().is_empty(), "name must not be empty");
        ensure!(
            self.name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            "name may contain only ASCII letters, digits, '-', '_' and '.'"
        );
        ensure!(
            self.delta.is_finite() && self.delta > 0.0,
            "delta must be positive"
        );
        ensure!(
            self.x0.len() == self.xdelta.len(),
            "x0 and xdelta have different lengths"
        );
        ensure!(
            self.x0.iter().chain(&self.xdelta).all(|c| c.is_finite()),
            "endpoints must be finite"
        );
        self.shape.validate()?;
        self.solver.validate()?;
        ensure!(
            self.analysis.window >= 1,
            "analysis.window must be at least 1"
        );
        match &self.points {
            PointSource::Inline { points } => {
                ensure!(!points.is_empty(), "inline point set is empty")
            }
            PointSource::File { .. } => {}
            PointSource::Mag { n, m, .. } => {
                ensure!(
                    self.x0.len() == n * m,
                    "MAG endpoints must have n·m = {} coordinates",
                    n * m
                )
            }
        }
        if let Some(o) = &self.oracle {
            ensure!(
                o.resolution.is_finite() && o.resolution > 0.0,
                "oracle.resolution must be positive"
            );
            ensure!(o.slices >= 2, "oracle.slices must be at least 2");
            if o.lo.is_some() != o.hi.is_some() {
                bail!("oracle.lo and oracle.hi must be given together");
            }
        }
        Ok(())
    }

    /// Output directory, resolved against `base` when relative.
    pub fn output_dir(&self, base: &Path) -> PathBuf {
        let dir = self
            .output
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(&self.name));
        if dir.is_absolute() {
            dir
        } else {
            base.join(dir)
        }
    }
}

/// Minimal actions over a family of point sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub name: String,
    #[serde(default)]
    pub shape: Shape,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub cases: Vec<StabilityCase>,
    #[serde(default)]
    pub expect: StabilityExpectations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityCase {
    pub label: String,
    pub points: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub xdelta: Vec<f64>,
    /// Closed-form action to compare against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityExpectations {
    /// Consecutive differences keep one sign.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub monotone: bool,
    /// Consecutive differences shrink in absolute value.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub contracting: bool,
    /// Bound on the difference between the last two actions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gap: Option<f64>,
    /// Bound on `|action − reference| / reference`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_rel_tol: Option<f64>,
}

impl StabilityConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StabilityConfig = toml::from_str(text).context("invalid stability config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.name.trim().is_empty(), "name must not be empty");
        ensure!(
            self.delta.is_finite() && self.delta > 0.0,
            "delta must be positive"
        );
        ensure!(
            self.cases.len() >= 2,
            "a stability run needs at least two cases"
        );
        self.shape.validate()?;
        self.solver.validate()?;
        for c in &self.cases {
            ensure!(!c.points.is_empty(), "case {} has no points", c.label);
            ensure!(
                c.x0.len() == c.xdelta.len(),
                "case {}: endpoint lengths differ",
                c.label
            );
        }
        Ok(())
    }

    pub fn output_dir(&self, base: &Path) -> PathBuf {
        let dir = self
            .output
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(&self.name));
        if dir.is_absolute() {
            dir
        } else {
            base.join(dir)
        }
    }
}

/// Parses `"a,b;c,d"` into points.
pub fn parse_point_list(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad coordinate {c:?}"))
                })
                .collect()
        })
        .collect()
}
