//! JSON run configuration shared by every subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cegis::CegisConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Field { path: String, message: String },
}

impl ConfigError {
    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Field {
            path: path.into(),
            message: message.into(),
        }
    }

    /// The offending field path, when there is one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Field { path, .. } => Some(path),
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub name: String,
    /// Π in order; formulas and labels refer to these names.
    pub propositions: Vec<String>,
    pub formula: String,
    /// Trace length bound N.
    pub horizon: usize,
    pub system: SystemConfig,
    pub labels: Vec<LabelConfig>,
    /// Proposition of every state outside the listed regions.
    pub default_label: String,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// One expression per state component in `x1.., u1.., w1..`.
    pub dynamics: Vec<String>,
    /// Standard deviation of each independent Gaussian `w_i`.
    pub noise_std: Vec<f64>,
    /// The finite input set U.
    pub inputs: Vec<Vec<f64>>,
    /// Working box X, one `[lo, hi]` per state.
    pub state_box: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelConfig {
    pub prop: String,
    pub region: RegionConfig,
}

/// Union of boxes and of conjunctions of `g(x) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    #[serde(default)]
    pub boxes: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub inequalities: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub enabled: bool,
    pub cegis: CegisConfig,
    /// Template degree per group index, overriding `cegis.degree`.
    pub degrees: BTreeMap<usize, u32>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            cegis: CegisConfig::default(),
            degrees: BTreeMap::new(),
        }
    }
}

impl SynthesisConfig {
    pub fn degree_for(&self, group: usize) -> u32 {
        self.degrees
            .get(&group)
            .copied()
            .unwrap_or(self.cegis.degree)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    /// The switching policy built from the synthesized certificates.
    Certified {
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
    /// Input nearest to `-(K x + b)`.
    Feedback {
        gains: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Constant {
        input: usize,
    },
}

fn default_tolerance() -> f64 {
    1e-9
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig::Certified {
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub runs: usize,
    /// Steps per run; the horizon when absent.
    pub steps: Option<usize>,
    pub confidence: f64,
    pub seed: u64,
    pub initial: InitialConfig,
    /// Number of runs written to the trajectory CSV.
    pub traces: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            runs: 10_000,
            steps: None,
            confidence: 0.99,
            seed: 0,
            initial: InitialConfig::default(),
            traces: 10,
        }
    }
}

/// Either a fixed point or uniform sampling from a proposition's region.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub prop: Option<String>,
    #[serde(default)]
    pub point: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ConfigError::field(
                if path == "." {
                    "(root)".to_string()
                } else {
                    path
                },
                strip_position(&inner),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn prop_index(&self, name: &str) -> Option<usize> {
        self.propositions.iter().position(|p| p == name)
    }

    pub fn steps(&self) -> usize {
        self.simulation.steps.unwrap_or(self.horizon)
    }

    /// Structural checks that do not need the parsers.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::field(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if self.formula.trim().is_empty() {
            return Err(ConfigError::field("formula", "must not be empty"));
        }
        if self.horizon == 0 {
            return Err(ConfigError::field("horizon", "must be at least 1"));
        }
        if self.propositions.is_empty() {
            return Err(ConfigError::field("propositions", "must not be empty"));
        }
        for (i, p) in self.propositions.iter().enumerate() {
            if self.propositions[..i].contains(p) {
                return Err(ConfigError::field(
                    format!("propositions[{i}]"),
                    format!("duplicate proposition `{p}`"),
                ));
            }
        }
        let sys = &self.system;
        let n = sys.dynamics.len();
        if n == 0 {
            return Err(ConfigError::field("system.dynamics", "must not be empty"));
        }
        if sys.state_box.len() != n {
            return Err(ConfigError::field(
                "system.state_box",
                format!(
                    "expected {n} intervals, one per state, got {}",
                    sys.state_box.len()
                ),
            ));
        }
        for (i, [lo, hi]) in sys.state_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(ConfigError::field(
                    format!("system.state_box[{i}]"),
                    "needs finite lo < hi",
                ));
            }
        }
        for (i, s) in sys.noise_std.iter().enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(ConfigError::field(
                    format!("system.noise_std[{i}]"),
                    "must be finite and non-negative",
                ));
            }
        }
        if sys.inputs.is_empty() {
            return Err(ConfigError::field(
                "system.inputs",
                "must list at least one input",
            ));
        }
        let m = sys.inputs[0].len();
        for (i, u) in sys.inputs.iter().enumerate() {
            if u.len() != m {
                return Err(ConfigError::field(
                    format!("system.inputs[{i}]"),
                    format!("expected {m} components, got {}", u.len()),
                ));
            }
        }
        if self.prop_index(&self.default_label).is_none() {
            return Err(ConfigError::field(
                "default_label",
                format!("unknown proposition `{}`", self.default_label),
            ));
        }
        for (i, l) in self.labels.iter().enumerate() {
            if self.prop_index(&l.prop).is_none() {
                return Err(ConfigError::field(
                    format!("labels[{i}].prop"),
                    format!("unknown proposition `{}`", l.prop),
                ));
            }
            if l.prop == self.default_label {
                return Err(ConfigError::field(
                    format!("labels[{i}].prop"),
                    "the default label cannot also have a region",
                ));
            }
            if self.labels[..i].iter().any(|o| o.prop == l.prop) {
                return Err(ConfigError::field(
                    format!("labels[{i}].prop"),
                    format!("`{}` is labeled twice", l.prop),
                ));
            }
            if l.region.boxes.is_empty() && l.region.inequalities.is_empty() {
                return Err(ConfigError::field(
                    format!("labels[{i}].region"),
                    "needs at least one box or inequality list",
                ));
            }
            for (j, b) in l.region.boxes.iter().enumerate() {
                if b.len() != n {
                    return Err(ConfigError::field(
                        format!("labels[{i}].region.boxes[{j}]"),
                        format!("expected {n} intervals"),
                    ));
                }
                if b.iter()
                    .any(|[lo, hi]| lo.is_nan() || hi.is_nan() || lo > hi)
                {
                    return Err(ConfigError::field(
                        format!("labels[{i}].region.boxes[{j}]"),
                        "needs lo <= hi",
                    ));
                }
            }
        }
        let syn = &self.synthesis;
        let even = |d: u32| d >= 2 && d.is_multiple_of(2);
        if !even(syn.cegis.degree) {
            return Err(ConfigError::field(
                "synthesis.cegis.degree",
                "must be even and at least 2",
            ));
        }
        for (g, d) in &syn.degrees {
            if !even(*d) {
                return Err(ConfigError::field(
                    format!("synthesis.degrees.{g}"),
                    "must be even and at least 2",
                ));
            }
        }
        match &self.policy {
            PolicyConfig::Certified { tolerance } if tolerance.is_nan() || *tolerance < 0.0 => {
                return Err(ConfigError::field(
                    "policy.tolerance",
                    "must be non-negative",
                ));
            }
            PolicyConfig::Certified { .. } if !syn.enabled => {
                return Err(ConfigError::field(
                    "policy.kind",
                    "a certified policy needs synthesis.enabled = true",
                ));
            }
            PolicyConfig::Feedback { gains, offset } => {
                if gains.len() != m || offset.len() != m {
                    return Err(ConfigError::field(
                        "policy.gains",
                        format!("expected {m} rows and {m} offsets, one per input component"),
                    ));
                }
                if let Some(r) = gains.iter().position(|row| row.len() != n) {
                    return Err(ConfigError::field(
                        format!("policy.gains[{r}]"),
                        format!("expected {n} gains"),
                    ));
                }
            }
            PolicyConfig::Constant { input } if *input >= sys.inputs.len() => {
                return Err(ConfigError::field(
                    "policy.input",
                    format!("index out of range for {} inputs", sys.inputs.len()),
                ));
            }
            _ => {}
        }
        let sim = &self.simulation;
        if sim.runs == 0 {
            return Err(ConfigError::field("simulation.runs", "must be at least 1"));
        }
        if sim.steps == Some(0) {
            return Err(ConfigError::field("simulation.steps", "must be at least 1"));
        }
        if !(sim.confidence > 0.0 && sim.confidence < 1.0) {
            return Err(ConfigError::field(
                "simulation.confidence",
                "must lie in (0, 1)",
            ));
        }
        match (&sim.initial.prop, &sim.initial.point) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(ConfigError::field(
                    "simulation.initial",
                    "give exactly one of `prop` and `point`",
                ));
            }
            (Some(p), None) if self.prop_index(p).is_none() => {
                return Err(ConfigError::field(
                    "simulation.initial.prop",
                    format!("unknown proposition `{p}`"),
                ));
            }
            (None, Some(x)) if x.len() != n => {
                return Err(ConfigError::field(
                    "simulation.initial.point",
                    format!("expected {n} components"),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

/// serde_json appends " at line L column C"; the path already locates it.
fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}
