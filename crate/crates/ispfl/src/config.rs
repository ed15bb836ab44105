//! Run configuration: one data setup, one training budget, a list of methods
//! and a list of seeds. Every (method, seed) pair is one run.

use std::fmt;
use std::path::{Path, PathBuf};

use ispfl_core::compress::Compressor;
use ispfl_core::ispcore::SchedulerConfig;
use ispfl_core::numkit::{LocalTraining, OptimizerConfig};
use ispfl_core::orchestrator::{CountMode, DataConfig, RunSpec};
use ispfl_core::sampling::StrategyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub data: DataConfig,
    pub training: TrainingConfig,
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub rounds: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Mini-batch size; 0 trains on the full local split.
    #[serde(default)]
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub patience: Option<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub communication_count: CountMode,
}

fn default_epochs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub label: String,
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub compression: Option<Compressor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write each seed's client partition next to the runs.
    #[serde(default)]
    pub export_partition: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            export_partition: false,
        }
    }
}

/// A config problem, reported with the dotted path of the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<ispfl_core::Error> for ConfigError {
    fn from(e: ispfl_core::Error) -> Self {
        match e {
            ispfl_core::Error::Config { field, reason } => ConfigError {
                path: field,
                message: reason,
            },
            other => ConfigError {
                path: String::new(),
                message: other.to_string(),
            },
        }
    }
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parses and validates. Missing keys are reported as `parent.key`.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            if let Some(key) = missing_field(&message) {
                path = if path == "." { key.to_owned() } else { format!("{path}.{key}") };
            }
            ConfigError {
                path: if path == "." { String::new() } else { path },
                message,
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.data.validate("data")?;
        let num_clients = self.data.num_clients;
        let t = &self.training;
        if t.epochs == 0 {
            return Err(invalid("training.epochs", "must be >= 1"));
        }
        t.optimizer.validate("training.optimizer")?;
        if t.seeds.is_empty() {
            return Err(invalid("training.seeds", "need at least one seed"));
        }
        if t.patience == Some(0) {
            return Err(invalid("training.patience", "must be >= 1 when set"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "need at least one method"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            let at = |key: &str| format!("methods[{i}].{key}");
            if m.label.is_empty()
                || !m
                    .label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            {
                return Err(invalid(at("label"), "use letters, digits, '-', '_' or '.'"));
            }
            if self.methods[..i].iter().any(|other| other.label == m.label) {
                return Err(invalid(at("label"), format!("duplicate label `{}`", m.label)));
            }
            m.scheduler.validate(&at("scheduler"), num_clients)?;
            match &m.strategy {
                StrategyConfig::PowD { d } if *d == 0 || *d > num_clients => {
                    return Err(invalid(at("strategy.d"), format!("must lie in [1, {num_clients}]")));
                }
                StrategyConfig::Valuation { weights: Some(w) } if w.len() != num_clients => {
                    return Err(invalid(
                        at("strategy.weights"),
                        format!("expected {num_clients} weights, got {}", w.len()),
                    ));
                }
                _ => {}
            }
            if let Some(c) = &m.compression {
                c.validate(&at("compression"))?;
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form (defaults filled in).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn run_spec(&self, method: usize, seed: u64) -> RunSpec {
        let m = &self.methods[method];
        let t = &self.training;
        RunSpec {
            rounds: t.rounds,
            local: LocalTraining {
                epochs: t.epochs,
                batch_size: t.batch_size,
                optimizer: t.optimizer,
            },
            patience: t.patience,
            scheduler: m.scheduler.clone(),
            strategy: m.strategy.clone(),
            compression: m.compression,
            seed,
        }
    }
}

fn missing_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}
