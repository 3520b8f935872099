//! Mini-batch training with Adam, gradient clipping, per-epoch JSON logs,
//! and best-validation checkpoint selection.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use pathcoder_ingest::{CodeSample, Dataset, Target};
use pathcoder_model::checkpoint::{snapshot, Checkpoint};
use pathcoder_model::encoder::{used_path_ids, EncoderInput, Model, Task};
use pathcoder_model::error::ModelError;
use pathcoder_model::params::{AdamState, Bindings, GradStore};
use pathcoder_model::tape::Tape;

use crate::config::RunConfig;
use crate::eval::evaluate;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation F1 (summarization) or hit@1 (completion); absent when the
    /// validation split is empty.
    pub val_metric: Option<f64>,
}

pub struct TrainOutcome {
    pub model: Model,
    pub best: Checkpoint,
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
    pub logs: Vec<EpochLog>,
}

/// Build the encoder-side view of one sample.
pub fn encoder_input<'a>(sample: &'a CodeSample, needs_paths: bool) -> EncoderInput<'a> {
    EncoderInput {
        language: usize::from(sample.language),
        tokens: &sample.subtokens,
        rel_ids: if needs_paths { &sample.rel_path_ref } else { &[] },
        abs_ids: if needs_paths { &sample.abs_path_ref } else { &[] },
    }
}

/// The gold name subtokens without the stored trailing <EOS> (the loss and
/// the decoder append it themselves).
pub fn gold_name(sample: &CodeSample) -> Option<&[u32]> {
    match &sample.target {
        Target::Summarization { tokens } => {
            Some(tokens.strip_suffix(&[pathcoder_model::encoder::specials::EOS]).unwrap_or(tokens))
        }
        Target::Completion { .. } => None,
    }
}

pub fn train(
    config: &RunConfig,
    dataset: &Dataset,
    log: &mut dyn Write,
) -> Result<TrainOutcome, anyhow::Error> {
    config.validate()?;
    let expected_task = match config.model.task {
        Task::Summarization => "summarization",
        Task::Completion => "completion",
    };
    if dataset.task != expected_task {
        anyhow::bail!(
            "dataset holds {} samples but the config trains {expected_task}",
            dataset.task
        );
    }
    let mut model = Model::init(
        config.model.clone(),
        dataset.vocab.len(),
        dataset.vocab.node_len(),
        dataset.languages.len(),
        config.train.seed,
    )?;
    let mut adam = AdamState::new(&model.store, config.train.lr);
    let train_split = dataset.split("train")?;
    if train_split.is_empty() {
        anyhow::bail!("training split is empty");
    }
    let table = dataset.path_table.entries();
    let needs_paths = model.path_encoder.is_some();
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    let mut logs = Vec::with_capacity(config.train.epochs);
    let mut best: Option<(f64, usize, Checkpoint)> = None;

    for epoch in 0..config.train.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut dropout_rng =
            ChaCha8Rng::seed_from_u64(config.train.seed ^ (epoch as u64).wrapping_add(1));
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.train.batch_size) {
            let loss =
                train_step(&mut model, &mut adam, config, dataset, table, needs_paths, batch, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(ModelError::DivergenceError(format!(
                    "non-finite loss {loss} at epoch {epoch}"
                ))
                .into());
            }
            loss_sum += loss * batch.len() as f64;
        }
        let train_loss = loss_sum / train_split.len() as f64;
        let val_metric = match dataset.splits.get("valid") {
            Some(v) if !v.is_empty() => {
                let report = evaluate(&model, dataset, "valid")?;
                Some(match config.model.task {
                    Task::Summarization => report.all.f1,
                    Task::Completion => report.all.top1,
                })
            }
            _ => None,
        };
        let entry = EpochLog { epoch, train_loss, val_metric };
        writeln!(log, "{}", serde_json::to_string(&entry)?)?;
        // Best checkpoint: highest validation metric; when there is no
        // validation split, the lowest training loss.
        let score = val_metric.unwrap_or(-train_loss);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            let ckpt = snapshot(
                &model,
                Some(&adam),
                serde_json::to_value(config)?,
                epoch,
                &dataset.vocab.hash(),
                &dataset.vocab.node_hash(),
            );
            best = Some((score, epoch, ckpt));
        }
        logs.push(entry);
    }
    let (score, best_epoch, best_ckpt) = best.expect("at least one epoch ran");
    let has_valid = logs.iter().any(|l| l.val_metric.is_some());
    Ok(TrainOutcome {
        model,
        best: best_ckpt,
        best_epoch,
        best_metric: has_valid.then_some(score),
        logs,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_step(
    model: &mut Model,
    adam: &mut AdamState,
    config: &RunConfig,
    dataset: &Dataset,
    table: &[Vec<u32>],
    needs_paths: bool,
    batch: &[usize],
    dropout_rng: &mut ChaCha8Rng,
) -> Result<f64, anyhow::Error> {
    let samples = dataset.split("train")?;
    let mut tape = Tape::new();
    let mut bind = Bindings::new();
    let mut used = BTreeSet::new();
    let mut langs = BTreeSet::new();
    for &i in batch {
        let s = &samples[i];
        langs.insert(usize::from(s.language));
        if needs_paths {
            used.extend(used_path_ids(&encoder_input(s, true)));
        }
    }
    let ctx = model.prepare(&mut tape, &mut bind, table, &used, &langs)?;
    let mut total: Option<pathcoder_model::tape::VarId> = None;
    for &i in batch {
        let s = &samples[i];
        let input = encoder_input(s, needs_paths);
        let loss = match &s.target {
            Target::Summarization { .. } => {
                let gold = gold_name(s).expect("summarization target");
                model.summarization_loss(&mut tape, &mut bind, &input, &ctx, gold, true, dropout_rng)?
            }
            Target::Completion { mask_position, answer_id } => model.completion_loss(
                &mut tape,
                &mut bind,
                &input,
                &ctx,
                *mask_position as usize,
                *answer_id,
                true,
                dropout_rng,
            )?,
        };
        total = Some(match total {
            Some(t) => tape.add(t, loss),
            None => loss,
        });
    }
    let total = total.expect("non-empty batch");
    let mean = tape.scale(total, 1.0 / batch.len() as f64);
    let loss_value = tape.scalar_value(mean);
    let tape_grads = tape.backward(mean);
    let mut grads = GradStore::zeros_like(&model.store);
    bind.collect(&tape_grads, &mut grads);
    if config.train.clip_norm > 0.0 {
        grads.clip_global_norm(config.train.clip_norm);
    }
    adam.apply(&mut model.store, &grads);
    Ok(loss_value)
}
