//! Evaluation, prediction dumps, and embedding export.

use std::collections::BTreeSet;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use pathcoder_ingest::{Dataset, Target};
use pathcoder_model::encoder::{used_path_ids, Model, Task};
use pathcoder_model::metrics::{subtoken_counts, topk_hit, MetricsReport};
use pathcoder_model::params::Bindings;
use pathcoder_model::tape::Tape;

use crate::train::{encoder_input, gold_name};

/// Longest name the greedy decoder will emit during evaluation.
pub const MAX_DECODE_LEN: usize = 12;

/// Per-language and pooled metrics over one split. Parameters are not
/// mutated; two calls return identical reports.
pub fn evaluate(model: &Model, dataset: &Dataset, split: &str) -> anyhow::Result<MetricsReport> {
    let samples = dataset.split(split)?;
    let table = dataset.path_table.entries();
    let needs_paths = model.path_encoder.is_some();
    let task_name = match model.config.task {
        Task::Summarization => "summarization",
        Task::Completion => "completion",
    };
    let mut report = MetricsReport::new(task_name);
    for sample in samples {
        let language = dataset.languages[usize::from(sample.language)].clone();
        let input = encoder_input(sample, needs_paths);
        match &sample.target {
            Target::Summarization { .. } => {
                let gold = gold_name(sample).expect("summarization target");
                let pred = model.greedy_decode(&input, table, MAX_DECODE_LEN)?;
                let (tp, fp, fn_) = subtoken_counts(&pred, gold);
                let entry = report.entry(&language);
                entry.samples += 1;
                entry.tp += tp;
                entry.fp += fp;
                entry.fn_ += fn_;
            }
            Target::Completion { mask_position, answer_id } => {
                let logits = completion_logits_vec(model, dataset, sample)?;
                let _ = mask_position;
                let entry = report.entry(&language);
                entry.samples += 1;
                if topk_hit(&logits, *answer_id as usize, 1) {
                    entry.hit1 += 1;
                }
                if topk_hit(&logits, *answer_id as usize, 5) {
                    entry.hit5 += 1;
                }
            }
        }
    }
    report.finalize();
    Ok(report)
}

/// Forward one completion sample on a fresh tape and return the logits row.
pub fn completion_logits_vec(
    model: &Model,
    dataset: &Dataset,
    sample: &pathcoder_ingest::CodeSample,
) -> anyhow::Result<Vec<f64>> {
    let Target::Completion { mask_position, .. } = &sample.target else {
        anyhow::bail!("sample {} is not a completion sample", sample.id);
    };
    let needs_paths = model.path_encoder.is_some();
    let input = encoder_input(sample, needs_paths);
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let used = if needs_paths { used_path_ids(&input) } else { BTreeSet::new() };
    let langs = BTreeSet::from([input.language]);
    let ctx = model.prepare(&mut tape, &mut bind, dataset.path_table.entries(), &used, &langs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = model.completion_logits(
        &mut tape,
        &mut bind,
        &input,
        &ctx,
        *mask_position as usize,
        false,
        &mut rng,
    )?;
    Ok(tape.value(logits).iter().copied().collect())
}

#[derive(Serialize)]
struct Prediction {
    id: String,
    prediction: Vec<String>,
    gold: Vec<String>,
}

/// Dump per-sample predictions as JSONL: sample id, prediction, gold.
pub fn predict(
    model: &Model,
    dataset: &Dataset,
    split: &str,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let samples = dataset.split(split)?;
    let table = dataset.path_table.entries();
    let needs_paths = model.path_encoder.is_some();
    let words = |ids: &[u32]| -> Vec<String> {
        ids.iter().map(|&i| dataset.vocab.subtoken(i).to_string()).collect()
    };
    for sample in samples {
        let input = encoder_input(sample, needs_paths);
        let record = match &sample.target {
            Target::Summarization { .. } => {
                let gold = gold_name(sample).expect("summarization target");
                let pred = model.greedy_decode(&input, table, MAX_DECODE_LEN)?;
                Prediction { id: sample.id.clone(), prediction: words(&pred), gold: words(gold) }
            }
            Target::Completion { answer_id, .. } => {
                let logits = completion_logits_vec(model, dataset, sample)?;
                let best = argmax_lowest(&logits) as u32;
                Prediction {
                    id: sample.id.clone(),
                    prediction: words(&[best]),
                    gold: words(&[*answer_id]),
                }
            }
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize)]
struct EmbeddingRecord {
    id: String,
    language: String,
    vector: Vec<f64>,
}

/// One record per sample: mean-pooled final encoder vector, language, id.
pub fn export_embeddings(
    model: &Model,
    dataset: &Dataset,
    split: &str,
    out: &mut dyn Write,
) -> anyhow::Result<usize> {
    let samples = dataset.split(split)?;
    let table = dataset.path_table.entries();
    let needs_paths = model.path_encoder.is_some();
    for sample in samples {
        let input = encoder_input(sample, needs_paths);
        let vector = model.pooled_embedding(&input, table)?;
        let record = EmbeddingRecord {
            id: sample.id.clone(),
            language: dataset.languages[usize::from(sample.language)].clone(),
            vector,
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(samples.len())
}
