//! Run configuration: a strict JSON document, defaults filled in on parse.

use nobind_core::bounds::ModelSpec;
use nobind_core::feynman_kac::{EndpointMode, KernelQuery, PathEnsemble};
use nobind_core::optimizer::SearchOptions;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Optimize,
    BoundCurve,
    Verify,
    Mc,
    Kernels,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Optimize => "optimize",
            Command::BoundCurve => "bound-curve",
            Command::Verify => "verify",
            Command::Mc => "mc",
            Command::Kernels => "kernels",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_n_check", alias = "N_check")]
    pub n_check: usize,
    #[serde(default = "default_search_seed")]
    pub seed: u64,
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
}

fn default_starts() -> usize {
    32
}
fn default_tol() -> f64 {
    1e-8
}
fn default_n_check() -> usize {
    10_000
}
fn default_search_seed() -> u64 {
    SearchOptions::default().seed
}
fn default_max_evaluations() -> usize {
    100_000
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: default_starts(),
            tol: default_tol(),
            n_check: default_n_check(),
            seed: default_search_seed(),
            max_evaluations: default_max_evaluations(),
        }
    }
}

impl OptimizerConfig {
    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            starts: self.starts,
            tol: self.tol,
            seed: self.seed,
            max_evaluations: self.max_evaluations,
            warm_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_horizon", alias = "T")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// Defaults to free paths from the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointMode>,
}

fn default_horizon() -> f64 {
    8.0
}
fn default_dt() -> f64 {
    1e-2
}
fn default_count() -> usize {
    1_000
}
fn default_alpha() -> f64 {
    1.0
}
fn default_dimension() -> usize {
    3
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            dt: default_dt(),
            count: default_count(),
            seed: 0,
            alpha: default_alpha(),
            dimension: default_dimension(),
            endpoint: None,
        }
    }
}

impl McConfig {
    pub fn ensemble(&self) -> PathEnsemble {
        let mode = self.endpoint.clone().unwrap_or(EndpointMode::Free { start: vec![0.0; self.dimension] });
        PathEnsemble { dimension: self.dimension, horizon: self.horizon, dt: self.dt, count: self.count, seed: self.seed, mode }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    100_000
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { samples: default_samples(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    pub queries: Vec<KernelQuery>,
    #[serde(default)]
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernels: Option<KernelsConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("missing field: {0}")]
    MissingField(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn backticked(message: &str) -> String {
    message.split('`').nth(1).unwrap_or(message).to_string()
}

fn classify(err: serde_json::Error) -> ConfigError {
    let message = err.to_string();
    if message.starts_with("unknown field") || message.starts_with("unknown variant") {
        ConfigError::UnknownKey(backticked(&message))
    } else if message.starts_with("missing field") {
        ConfigError::MissingField(backticked(&message))
    } else {
        let text = message.rsplit_once(" at line ").map_or(message.as_str(), |(head, _)| head).to_string();
        ConfigError::Parse { line: err.line(), column: err.column(), message: text }
    }
}

/// Parses and validates a configuration. A command given on the command
/// line fills in (or must agree with) the document's `command` key.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunConfig, ConfigError> {
    let mut config: RunConfig = serde_json::from_str(text).map_err(classify)?;
    match (config.command, command) {
        (Some(a), Some(b)) if a != b => {
            return Err(ConfigError::Invalid(format!("config is for `{}` but `{}` was requested", a.name(), b.name())))
        }
        (None, Some(b)) => config.command = Some(b),
        (None, None) => return Err(ConfigError::MissingField("command".into())),
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn command(&self) -> Command {
        self.command.expect("validated config has a command")
    }

    fn require_model(&self) -> Result<ModelSpec, ConfigError> {
        let model = self.model.ok_or_else(|| ConfigError::MissingField("model".into()))?;
        model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        match self.command.ok_or_else(|| ConfigError::MissingField("command".into()))? {
            Command::Optimize => {
                self.require_model()?;
            }
            Command::BoundCurve => {
                if self.lambda_grid.is_none() {
                    return Err(ConfigError::MissingField("lambda_grid".into()));
                }
            }
            Command::Mc => {
                let model = self.require_model()?;
                if matches!(model, ModelSpec::Nelson { .. }) {
                    return invalid("mc supports the optical and piezo models".into());
                }
                self.mc.ensemble().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if !(self.mc.alpha >= 0.0) || !self.mc.alpha.is_finite() {
                    return invalid(format!("mc.alpha = {} must be finite and >= 0", self.mc.alpha));
                }
            }
            Command::Kernels => {
                if self.kernels.is_none() {
                    return Err(ConfigError::MissingField("kernels".into()));
                }
            }
            Command::Verify => {
                if self.verify.samples == 0 {
                    return invalid("verify.samples must be positive".into());
                }
            }
        }
        let o = &self.optimizer;
        if o.starts == 0 || !(o.tol > 0.0) || o.n_check < 10 || o.max_evaluations == 0 {
            return invalid("optimizer needs starts >= 1, tol > 0, n_check >= 10, max_evaluations >= 1".into());
        }
        Ok(())
    }

    /// The seed that governs this command's randomness, if any.
    pub fn seed(&self) -> Option<u64> {
        match self.command {
            Some(Command::Optimize) | Some(Command::BoundCurve) => Some(self.optimizer.seed),
            Some(Command::Mc) => Some(self.mc.seed),
            Some(Command::Verify) => Some(self.verify.seed),
            Some(Command::Kernels) | None => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.optimizer.seed = seed;
        self.mc.seed = seed;
        self.verify.seed = seed;
    }

    /// Canonical JSON with every default spelled out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
