//! End-to-end corpus ingestion: parse, split, build vocabularies, and
//! produce task-ready samples.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{IngestError, Result};
use crate::sample::{
    make_completion_sample, make_summarization_sample, ParsedFunction, PathTable,
};
use crate::tree::LANGUAGES;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestTask {
    Summarization,
    Completion,
}

impl IngestTask {
    pub fn name(self) -> &'static str {
        match self {
            IngestTask::Summarization => "summarization",
            IngestTask::Completion => "completion",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub task: IngestTask,
    pub min_count: u32,
    pub seed: u64,
    /// Fractions for train and valid; test takes the remainder.
    pub train_fraction: f64,
    pub valid_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            task: IngestTask::Summarization,
            min_count: 100,
            seed: 0,
            train_fraction: 0.8,
            valid_fraction: 0.1,
        }
    }
}

/// One source function awaiting ingestion.
#[derive(Debug, Clone)]
pub struct SourceFunction {
    pub language: String,
    pub source: String,
}

/// Parse, split per language, build vocabularies from the training split,
/// and construct samples for every split. Functions that fail task
/// preconditions (anonymous, too short) are skipped; parse failures are
/// skipped too and counted in the returned report.
pub fn ingest_corpus(corpus: &[SourceFunction], options: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    let mut report = IngestReport::default();
    // Parse, keeping per-language order stable.
    let mut parsed: Vec<ParsedFunction> = Vec::new();
    for func in corpus {
        match ParsedFunction::parse(&func.source, &func.language) {
            Ok(p) => parsed.push(p),
            Err(IngestError::UnsupportedLanguage(l)) => {
                return Err(IngestError::UnsupportedLanguage(l))
            }
            Err(_) => report.parse_failures += 1,
        }
    }
    // Deterministic shuffled split, stratified by language.
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut split_of = vec![""; parsed.len()];
    for lang in 0..LANGUAGES.len() {
        let mut idx: Vec<usize> =
            (0..parsed.len()).filter(|&i| parsed[i].language as usize == lang).collect();
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = (n as f64 * options.train_fraction).round() as usize;
        let n_valid = (n as f64 * options.valid_fraction).round() as usize;
        for (k, &i) in idx.iter().enumerate() {
            split_of[i] = if k < n_train {
                "train"
            } else if k < n_train + n_valid {
                "valid"
            } else {
                "test"
            };
        }
    }
    let train_funcs: Vec<&ParsedFunction> = parsed
        .iter()
        .zip(&split_of)
        .filter(|(_, s)| **s == "train")
        .map(|(f, _)| f)
        .collect();
    if train_funcs.is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    let vocab = Vocabulary::build_from_iter(train_funcs.iter().copied(), options.min_count)?;

    let mut table = PathTable::new();
    let mut splits: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for name in ["train", "valid", "test"] {
        splits.insert(name.to_string(), Vec::new());
    }
    for (i, (func, split)) in parsed.iter().zip(&split_of).enumerate() {
        let id = format!("{}-{i:05}", LANGUAGES[func.language as usize]);
        let made = match options.task {
            IngestTask::Summarization => {
                make_summarization_sample(func, &vocab, &mut table, id)
            }
            IngestTask::Completion => {
                // Seed each sample from the run seed and its stable index.
                make_completion_sample(
                    func,
                    &vocab,
                    &mut table,
                    id,
                    options.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64),
                )
            }
        };
        match made {
            Ok(sample) => splits.get_mut(*split).unwrap().push(sample),
            Err(IngestError::NoName) | Err(IngestError::TooShort) => report.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if splits["train"].is_empty() {
        return Err(IngestError::EmptyCorpus);
    }
    report.samples = splits.values().map(Vec::len).sum();
    let dataset = Dataset {
        task: options.task.name().to_string(),
        languages: LANGUAGES.iter().map(|s| s.to_string()).collect(),
        vocab,
        path_table: table,
        splits,
    };
    Ok((dataset, report))
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub parse_failures: usize,
    pub skipped: usize,
    pub samples: usize,
}
