use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot parse source: {0}")]
    ParseError(String),
    #[error("no grammar adapter registered for language {0:?}")]
    UnsupportedLanguage(String),
    #[error("index {0} is not a leaf token")]
    IndexError(usize),
    #[error("function has no name")]
    NoName,
    #[error("function has too few subtokens to mask")]
    TooShort,
    #[error("corpus has no training samples")]
    EmptyCorpus,
    #[error("dataset format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt dataset file: {0}")]
    CorruptFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IngestError>;
