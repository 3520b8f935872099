//! Run configuration: TOML files, named presets, and validation.

use pathcoder_model::encoder::{ModelConfig, Task};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

fn default_lr() -> f64 {
    1e-4
}

fn default_batch_size() -> usize {
    128
}

fn default_clip_norm() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Constant Adam learning rate; no schedule.
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Global-norm gradient clip; 0 disables it.
    #[serde(default = "default_clip_norm")]
    pub clip_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub const PRESET_NAMES: [&str; 4] =
    ["paper-summarization", "paper-completion", "desk-summarization", "desk-completion"];

const PAPER_SUMMARIZATION: &str = include_str!("../presets/paper-summarization.toml");
const PAPER_COMPLETION: &str = include_str!("../presets/paper-completion.toml");

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let cfg = match name {
        "paper-summarization" => toml::from_str(PAPER_SUMMARIZATION)?,
        "paper-completion" => toml::from_str(PAPER_COMPLETION)?,
        "desk-summarization" => desk(Task::Summarization),
        "desk-completion" => desk(Task::Completion),
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

/// Small CPU-scale configuration for fixture experiments.
fn desk(task: Task) -> RunConfig {
    RunConfig {
        model: ModelConfig::desk(task),
        train: TrainConfig {
            lr: 1e-3,
            batch_size: 16,
            epochs: match task {
                Task::Summarization => 30,
                Task::Completion => 40,
            },
            seed: 0,
            clip_norm: 1.0,
        },
    }
}

impl RunConfig {
    pub fn from_file(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.train.lr.is_finite() && self.train.lr >= 0.0) {
            return Err(ConfigError::Invalid("learning rate must be finite and >= 0".into()));
        }
        if self.train.batch_size == 0 {
            return Err(ConfigError::Invalid("batch size must be positive".into()));
        }
        if self.train.epochs == 0 {
            return Err(ConfigError::Invalid("epoch count must be positive".into()));
        }
        if !(self.train.clip_norm.is_finite() && self.train.clip_norm >= 0.0) {
            return Err(ConfigError::Invalid("clip norm must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Command-line overrides layered on top of a file or preset.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) -> Result<(), ConfigError> {
        if let Some(e) = self.epochs {
            config.train.epochs = e;
        }
        if let Some(lr) = self.lr {
            config.train.lr = lr;
        }
        if let Some(b) = self.batch_size {
            config.train.batch_size = b;
        }
        if let Some(s) = self.seed {
            config.train.seed = s;
        }
        if let Some(scheme) = &self.scheme {
            config.model.scheme = scheme
                .parse()
                .map_err(|e: pathcoder_model::error::ModelError| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(variant) = &self.variant {
            config.model.variant = variant.clone();
        }
        if let Some(d) = self.dropout {
            config.model.dropout = d;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pathcoder_model::meta::Scheme;

    #[test]
    fn paper_summarization_preset_fields() {
        let c = preset("paper-summarization").unwrap();
        assert_eq!(c.model.task, Task::Summarization);
        assert_eq!(c.model.d, 1024);
        assert_eq!(c.model.word_emb_dim, 512);
        assert_eq!(c.model.node_emb_dim, 64);
        assert_eq!(c.model.path_hidden, 64);
        assert_eq!(c.model.layers, 3);
        assert_eq!(c.model.decoder_layers, 8);
        assert_eq!(c.model.heads, 3);
        assert_eq!(c.model.ffn_dim, 4096);
        assert_eq!(c.model.dropout, 0.2);
        assert_eq!(c.model.d_t, 1024);
        assert_eq!(c.model.d_p, 2048);
        assert!(c.model.pointer);
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.epochs, 10);
    }

    #[test]
    fn paper_completion_preset_fields() {
        let c = preset("paper-completion").unwrap();
        assert_eq!(c.model.task, Task::Completion);
        assert_eq!(c.model.d, 1024);
        assert_eq!(c.model.word_emb_dim, 512);
        assert_eq!(c.model.node_emb_dim, 64);
        assert_eq!(c.model.path_hidden, 64);
        assert_eq!(c.model.layers, 5);
        assert_eq!(c.model.heads, 8);
        assert_eq!(c.model.ffn_dim, 2048);
        assert_eq!(c.model.dropout, 0.2);
        assert_eq!(c.model.d_t, 512);
        assert_eq!(c.model.d_p, 512);
        assert!(!c.model.pointer);
        assert_eq!(c.train.lr, 1e-4);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.epochs, 40);
    }

    #[test]
    fn desk_presets_validate() {
        for name in ["desk-summarization", "desk-completion"] {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(matches!(preset("bogus"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn overrides_apply_in_order() {
        let mut c = preset("desk-completion").unwrap();
        let o = Overrides {
            epochs: Some(3),
            lr: Some(0.5),
            scheme: Some("alpha".into()),
            ..Default::default()
        };
        o.apply(&mut c).unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.lr, 0.5);
        assert_eq!(c.model.scheme, Scheme::Alpha);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut c = preset("desk-completion").unwrap();
        c.train.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = preset("desk-completion").unwrap();
        c.train.lr = f64::NAN;
        assert!(c.validate().is_err());
        let mut c = preset("desk-completion").unwrap();
        c.model.dropout = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = preset("desk-summarization").unwrap();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.model.d, c.model.d);
        assert_eq!(back.train.epochs, c.train.epochs);
    }
}
