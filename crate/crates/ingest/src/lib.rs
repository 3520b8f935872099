//! Corpus ingestion: parsing multilingual source functions into syntax
//! trees, extracting subtoken sequences and tree paths, building
//! vocabularies, and serializing task-ready datasets.

pub mod dataset;
pub mod error;
pub mod paths;
pub mod pipeline;
pub mod sample;
pub mod split;
pub mod tree;
pub mod vocab;

pub use dataset::{load_dataset, serialize_dataset, Dataset, SampleEncoding};
pub use error::{IngestError, Result};
pub use pipeline::{ingest_corpus, IngestOptions, IngestTask, SourceFunction};
pub use sample::{CodeSample, ParsedFunction, PathTable, Target};
pub use vocab::Vocabulary;
