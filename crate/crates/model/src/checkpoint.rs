//! Checkpoint serialization: parameters, optimizer state, and enough
//! metadata to refuse loading against a mismatched dataset.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::encoder::{Model, ModelConfig};
use crate::error::{ModelError, Result};
use crate::params::{AdamState, ParamStore};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_config: ModelConfig,
    /// Opaque run-configuration snapshot, stored for reproducibility.
    pub run_config: serde_json::Value,
    pub epoch: usize,
    pub vocab_size: usize,
    pub node_vocab: usize,
    pub n_languages: usize,
    /// Hex digest of the subtoken vocabulary this model was trained with.
    pub vocab_hash: String,
    /// Hex digest of the node-type vocabulary.
    pub node_vocab_hash: String,
    pub store: ParamStore,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        let writer = std::io::BufWriter::new(file);
        serde_json::to_writer(writer, self).map_err(std::io::Error::other)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| ModelError::ConfigError(format!("cannot open checkpoint: {e}")))?;
        let reader = std::io::BufReader::new(file);
        let ckpt: Checkpoint = serde_json::from_reader(reader)
            .map_err(|e| ModelError::ConfigError(format!("corrupt checkpoint: {e}")))?;
        if ckpt.format_version != FORMAT_VERSION {
            return Err(ModelError::ConfigError(format!(
                "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }

    /// Rebuild the model, verifying the vocabulary digests match the
    /// dataset the caller is about to use it with.
    pub fn restore(&self, vocab_hash: &str, node_vocab_hash: &str) -> Result<Model> {
        if self.vocab_hash != vocab_hash || self.node_vocab_hash != node_vocab_hash {
            return Err(ModelError::VocabMismatch);
        }
        Model::with_store(
            self.model_config.clone(),
            self.vocab_size,
            self.node_vocab,
            self.n_languages,
            self.store.clone(),
        )
    }
}

/// Snapshot a model (and optionally its optimizer) into a checkpoint.
pub fn snapshot(
    model: &Model,
    adam: Option<&AdamState>,
    run_config: serde_json::Value,
    epoch: usize,
    vocab_hash: &str,
    node_vocab_hash: &str,
) -> Checkpoint {
    Checkpoint {
        format_version: FORMAT_VERSION,
        model_config: model.config.clone(),
        run_config,
        epoch,
        vocab_size: model.vocab_size,
        node_vocab: model.node_vocab,
        n_languages: model.n_languages,
        vocab_hash: vocab_hash.to_string(),
        node_vocab_hash: node_vocab_hash.to_string(),
        store: model.store.clone(),
        adam: adam.cloned(),
    }
}
