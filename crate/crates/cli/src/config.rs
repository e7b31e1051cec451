//! Job configuration files (TOML). Unknown keys are rejected everywhere.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cpexit::entry::EntryStart;
use cpexit::model::ProcessParams;
use cpexit::resolvent::ResolventMethod;
use cpexit::simulate::SimConfig;
use cpexit::tolerances::Tolerances;
use cpexit::validation::reference_params;
use serde::{Deserialize, Serialize};

/// A list of values or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range(Range),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self, name: &str) -> Result<Vec<f64>> {
        let out = match self {
            Grid::List(v) => v.clone(),
            Grid::Range(r) => {
                if !(r.step > 0.0) || !(r.stop >= r.start) {
                    bail!("grid `{name}`: need step > 0 and stop >= start");
                }
                let n = ((r.stop - r.start) / r.step + 1e-9).floor() as usize;
                (0..=n).map(|i| r.start + i as f64 * r.step).collect()
            }
        };
        if out.is_empty() {
            bail!("grid `{name}` is empty");
        }
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            bail!("grid `{name}` contains a non-finite value {v}");
        }
        Ok(out)
    }
}

/// Grids over the job arguments. Each job reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub s: Option<Grid>,
    pub x: Option<Grid>,
    #[serde(rename = "B")]
    pub b: Option<Grid>,
    pub y: Option<Grid>,
    pub z: Option<Grid>,
    pub t: Option<Grid>,
    pub start: Option<Vec<EntryStart>>,
}

impl Grids {
    pub fn get(&self, name: &str) -> Result<Vec<f64>> {
        let grid = match name {
            "s" => &self.s,
            "x" => &self.x,
            "B" => &self.b,
            "y" => &self.y,
            "z" => &self.z,
            "t" => &self.t,
            _ => unreachable!("unknown grid {name}"),
        };
        grid.as_ref()
            .with_context(|| format!("this job needs the grid `{name}`"))?
            .values(name)
    }

    pub fn starts(&self) -> Result<Vec<EntryStart>> {
        match &self.start {
            Some(v) if !v.is_empty() => Ok(v.clone()),
            _ => bail!("this job needs a non-empty `start` list"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// File name, relative to the output directory. Defaults to `<job>.<ext>`.
    pub path: Option<String>,
    pub format: Option<Format>,
}

/// One simulated functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Functional {
    /// `E[exp(-s chi(y)); A_0]`.
    ExitDown {
        #[serde(rename = "B")]
        b: f64,
        y: f64,
        s: f64,
    },
    /// `E[exp(-s chi(y) - z X(y)); A^B]`.
    ExitUp {
        #[serde(rename = "B")]
        b: f64,
        y: f64,
        s: f64,
        #[serde(default)]
        z: f64,
    },
    /// `P[chi(y) > t]`.
    Survival {
        #[serde(rename = "B")]
        b: f64,
        y: f64,
        t: f64,
    },
    /// `E[exp(-s bar chi - z bar X)]`.
    Entry {
        #[serde(rename = "B")]
        b: f64,
        start: EntryStart,
        s: f64,
        #[serde(default)]
        z: f64,
    },
    /// `E[exp(-s tau^x - z T^x)]`.
    UpCrossing {
        x: f64,
        s: f64,
        #[serde(default)]
        z: f64,
    },
    /// `E[exp(-s tau_x - z T_x)]`.
    DownCrossing {
        x: f64,
        s: f64,
        #[serde(default)]
        z: f64,
    },
    /// `c(s)/(s lambda) E[exp(c(s)(x - sup)); sup <= x]`, an estimate of `R_x(s)`.
    Resolvent { x: f64, s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_paths: usize,
    pub seed: u64,
    pub max_jumps: usize,
    pub antithetic: bool,
    pub functionals: Vec<Functional>,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_paths: d.n_paths,
            seed: d.seed,
            max_jumps: d.max_jumps,
            antithetic: d.antithetic,
            functionals: Vec::new(),
        }
    }
}

impl SimSection {
    pub fn config(&self) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            seed: self.seed,
            max_jumps: self.max_jumps,
            antithetic: self.antithetic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Resolvent,
    OneBoundary,
    Exit,
    Entry,
    Survival,
    Simulate,
    Validate,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Resolvent => "resolvent",
            JobKind::OneBoundary => "one_boundary",
            JobKind::Exit => "exit",
            JobKind::Entry => "entry",
            JobKind::Survival => "survival",
            JobKind::Simulate => "simulate",
            JobKind::Validate => "validate",
        }
    }
}

/// A full job file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    /// Must match the subcommand when given.
    pub job: Option<JobKind>,
    pub params: ProcessParams,
    pub method: ResolventMethod,
    pub grid: Grids,
    pub sim: SimSection,
    pub output: OutputConfig,
    pub tolerances: Tolerances,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            job: None,
            params: reference_params(),
            method: ResolventMethod::Auto,
            grid: Grids::default(),
            sim: SimSection::default(),
            output: OutputConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl JobConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: JobConfig = toml::from_str(text)?;
        cfg.sim.config().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}
