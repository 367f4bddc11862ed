//! Experiment configuration: TOML schema, validation and flag overrides.

use std::path::{Path, PathBuf};

use adiabat::models::ModelSpec;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// A single `[schedule]` table or several `[[schedule]]` tables.
    #[serde(default, deserialize_with = "one_or_many")]
    pub schedule: Vec<ScheduleBlock>,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    Linear,
    Beta,
    SmoothedBeta,
    Sqrt,
    GapInformed,
}

impl ScheduleChoice {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleChoice::Linear => "linear",
            ScheduleChoice::Beta => "beta",
            ScheduleChoice::SmoothedBeta => "smoothed_beta",
            ScheduleChoice::Sqrt => "sqrt",
            ScheduleChoice::GapInformed => "gap_informed",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    #[default]
    Linear,
    GapInformed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub kind: ScheduleChoice,
    /// Order of the beta transition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Width of the boundary windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Schedule followed away from the boundaries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceChoice>,
    /// CSV with columns `s, gap`; computed from the model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_table_path: Option<PathBuf>,
    /// Degree of the gap-informed polynomial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

impl ScheduleBlock {
    pub fn of(kind: ScheduleChoice) -> Self {
        ScheduleBlock {
            kind,
            n: None,
            d: None,
            reference: None,
            gap_table_path: None,
            degree: None,
        }
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_reference(mut self, r: ReferenceChoice) -> Self {
        self.reference = Some(r);
        self
    }

    /// Whether building this schedule needs a gap table.
    pub fn needs_gap(&self) -> bool {
        self.kind == ScheduleChoice::GapInformed
            || self.reference == Some(ReferenceChoice::GapInformed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetChoice {
    /// Numerically solved ground state of the final Hamiltonian.
    #[default]
    Ground,
    /// The alternating product state `|0101…⟩`.
    Neel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    /// Total evolution times; mutually exclusive with `epsilon`.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub total_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub target: TargetChoice,
    /// Grid size of computed gap profiles.
    #[serde(default = "default_gap_points")]
    pub gap_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

fn default_tolerance() -> f64 {
    adiabat::evolution::DEFAULT_TOLERANCE
}
fn default_samples() -> usize {
    adiabat::evolution::DEFAULT_SAMPLES
}
fn default_gap_points() -> usize {
    101
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            total_times: None,
            epsilon: None,
            tolerance: default_tolerance(),
            samples: default_samples(),
            target: TargetChoice::default(),
            gap_points: default_gap_points(),
            max_steps: None,
        }
    }
}

impl RunBlock {
    /// Total times in the given order, from either `T` or `epsilon`.
    pub fn times(&self) -> Vec<f64> {
        match (&self.total_times, &self.epsilon) {
            (Some(t), _) => t.clone(),
            (None, Some(e)) => e.iter().map(|e| 1.0 / e).collect(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Write wall-clock runtimes; disable for byte-reproducible tables.
    #[serde(default = "default_true")]
    pub record_runtime: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from(".")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}
fn default_true() -> bool {
    true
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: default_directory(),
            formats: default_formats(),
            record_runtime: true,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<ScheduleBlock>, D::Error> {
    let value = toml::Value::deserialize(de)?;
    match value {
        toml::Value::Array(_) => Vec::<ScheduleBlock>::deserialize(value),
        _ => ScheduleBlock::deserialize(value).map(|b| vec![b]),
    }
    .map_err(serde::de::Error::custom)
}

/// Values given on the command line; each replaces its config field.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sites: Option<usize>,
    pub total_times: Option<Vec<f64>>,
    pub epsilon: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub samples: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub record_runtime: Option<bool>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative gap table paths are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.schedule {
            if let Some(p) = &s.gap_table_path {
                if p.is_relative() {
                    s.gap_table_path = Some(base.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(l) = o.sites {
            match &mut self.model {
                ModelSpec::Ising { sites } | ModelSpec::Rydberg { sites, .. } => *sites = l,
            }
        }
        if let Some(t) = &o.total_times {
            self.run.total_times = Some(t.clone());
            self.run.epsilon = None;
        }
        if let Some(e) = &o.epsilon {
            self.run.epsilon = Some(e.clone());
            self.run.total_times = None;
        }
        if let Some(t) = o.tolerance {
            self.run.tolerance = t;
        }
        if let Some(s) = o.samples {
            self.run.samples = s;
        }
        if let Some(d) = &o.output_dir {
            self.output.directory = d.clone();
        }
        if let Some(r) = o.record_runtime {
            self.output.record_runtime = r;
        }
    }

    /// Checks everything that can be checked without numerics.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("{field}: {msg}")));
        let sites = self.model.sites();
        if !(1..=24).contains(&sites) {
            return bad("model.L", format!("must be between 1 and 24, got {sites}"));
        }
        if let ModelSpec::Rydberg {
            spacing_um,
            omega_r,
            delta_r,
            ..
        } = &self.model
        {
            for (name, v) in [
                ("model.spacing_um", spacing_um),
                ("model.omega_r", omega_r),
                ("model.delta_r", delta_r),
            ] {
                if !(*v > 0.0 && v.is_finite()) {
                    return bad(name, format!("must be positive, got {v}"));
                }
            }
        }
        for (i, s) in self.schedule.iter().enumerate() {
            let at = |f: &str| format!("schedule[{i}].{f}");
            let wants_n = matches!(s.kind, ScheduleChoice::Beta | ScheduleChoice::SmoothedBeta);
            match (wants_n, s.n) {
                (true, None) => return bad(&at("n"), format!("required for kind {}", s.kind.name())),
                (false, Some(_)) => return bad(&at("n"), format!("not used by kind {}", s.kind.name())),
                (true, Some(n)) if n > 20 => return bad(&at("n"), format!("must be at most 20, got {n}")),
                _ => {}
            }
            let wants_d = matches!(s.kind, ScheduleChoice::SmoothedBeta | ScheduleChoice::Sqrt);
            if !wants_d && s.d.is_some() {
                return bad(&at("d"), format!("not used by kind {}", s.kind.name()));
            }
            if !wants_d && s.reference.is_some() {
                return bad(&at("reference"), format!("not used by kind {}", s.kind.name()));
            }
            if let Some(d) = s.d {
                let upper = if s.kind == ScheduleChoice::Sqrt { 0.25 } else { 0.5 };
                if !(d > 0.0 && d < upper || s.kind == ScheduleChoice::Sqrt && d == upper) {
                    return bad(&at("d"), format!("out of range, got {d}"));
                }
            }
            if !s.needs_gap() && (s.gap_table_path.is_some() || s.degree.is_some()) {
                return bad(
                    &at("gap_table_path"),
                    "gap settings given but the schedule does not use a gap table".into(),
                );
            }
            if s.degree == Some(0) {
                return bad(&at("degree"), "must be at least 1".into());
            }
        }
        if self.run.total_times.is_some() && self.run.epsilon.is_some() {
            return bad("run", "give either T or epsilon, not both".into());
        }
        for t in self.run.times() {
            if !(t > 0.0 && t.is_finite()) {
                return bad("run.T", format!("total times must be positive and finite, got {t}"));
            }
        }
        if !(self.run.tolerance > 0.0 && self.run.tolerance.is_finite()) {
            return bad("run.tolerance", format!("must be positive, got {}", self.run.tolerance));
        }
        if self.run.samples == 0 {
            return bad("run.samples", "must be at least 1".into());
        }
        if self.run.gap_points < 2 {
            return bad("run.gap_points", "must be at least 2".into());
        }
        if self.run.target == TargetChoice::Neel && !matches!(self.model, ModelSpec::Ising { .. }) {
            return bad("run.target", "neel is defined for the ising model only".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats", "at least one format is required".into());
        }
        Ok(())
    }

    pub fn require_schedules(&self) -> Result<(), CliError> {
        if self.schedule.is_empty() {
            return Err(CliError::Config("schedule: at least one schedule block is required".into()));
        }
        Ok(())
    }

    pub fn require_times(&self) -> Result<Vec<f64>, CliError> {
        let t = self.run.times();
        if t.is_empty() {
            return Err(CliError::Config("run: T or epsilon is required".into()));
        }
        Ok(t)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
