//! Library surface of the command-line tool: configuration, training,
//! evaluation, and the synthetic fixture corpus.

pub mod config;
pub mod eval;
pub mod fixture;
pub mod train;

pub use config::{preset, ConfigError, Overrides, RunConfig, TrainConfig};
pub use eval::{completion_logits_vec, evaluate, export_embeddings, predict};
pub use fixture::{generate_corpus, read_corpus, write_corpus};
pub use train::{encoder_input, gold_name, train, EpochLog, TrainOutcome};
