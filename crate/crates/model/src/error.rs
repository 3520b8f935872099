use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("path length {0} exceeds the maximum of {1}")]
    PathTooLong(usize, usize),
    #[error("unknown node type id {0} (vocabulary size {1})")]
    UnknownNodeType(usize, usize),
    #[error("attention row {0} has no unmasked column")]
    AllMasked(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("weight set tags do not match scheme {0}")]
    SchemeMismatch(String),
    #[error("language code {0} is not registered")]
    UnknownLanguage(usize),
    #[error("mask position {0} does not hold the mask token")]
    BadMaskPosition(usize),
    #[error("invalid configuration: {0}")]
    ConfigError(String),
    #[error("checkpoint vocabulary hash does not match the dataset")]
    VocabMismatch,
    #[error("training diverged: {0}")]
    DivergenceError(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
