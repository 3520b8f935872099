//! Command-line entry point. Exit codes: 0 success, 2 configuration error,
//! 3 runtime failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pathcoder_cli::config::{preset, Overrides, RunConfig};
use pathcoder_cli::{evaluate, export_embeddings, generate_corpus, predict, read_corpus, train, write_corpus};
use pathcoder_ingest::{
    ingest_corpus, load_dataset, serialize_dataset, IngestOptions, IngestTask, SampleEncoding,
};
use pathcoder_model::checkpoint::Checkpoint;
use pathcoder_model::encoder::Model;

#[derive(Parser)]
#[command(name = "pathcoder", about = "Multilingual code representation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic bilingual fixture corpus as JSONL.
    GenFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        per_language: usize,
    },
    /// Parse a JSONL corpus into a serialized dataset directory.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["summarization", "completion"])]
        task: String,
        #[arg(long, default_value_t = 100)]
        min_count: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = ["jsonl", "binary"], default_value = "jsonl")]
        encoding: String,
    },
    /// Train a model and save the best-validation checkpoint.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// TOML run configuration; mutually exclusive with --preset.
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Epoch log destination (line-delimited JSON); stderr when absent.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate a checkpoint on one split and print a metrics report.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump per-sample predictions as JSONL.
    Predict {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export mean-pooled encoder embeddings as JSONL.
    ExportEmbeddings {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Errors that reflect bad configuration rather than runtime failure.
fn is_config_error(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<pathcoder_cli::ConfigError>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<pathcoder_model::error::ModelError>(),
        Some(pathcoder_model::error::ModelError::ConfigError(_))
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_config_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn load_model(dataset: &pathcoder_ingest::Dataset, path: &PathBuf) -> anyhow::Result<Model> {
    let ckpt = Checkpoint::load(path)?;
    Ok(ckpt.restore(&dataset.vocab.hash(), &dataset.vocab.node_hash())?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenFixture { out, per_language } => {
            let corpus = generate_corpus(per_language);
            write_corpus(&corpus, &out)?;
            eprintln!("wrote {} functions to {}", corpus.len(), out.display());
        }
        Command::Ingest { corpus, out, task, min_count, seed, encoding } => {
            let functions = read_corpus(&corpus)?;
            let options = IngestOptions {
                task: if task == "summarization" {
                    IngestTask::Summarization
                } else {
                    IngestTask::Completion
                },
                min_count,
                seed,
                ..Default::default()
            };
            let (dataset, report) = ingest_corpus(&functions, &options)?;
            let enc = if encoding == "jsonl" { SampleEncoding::Jsonl } else { SampleEncoding::Binary };
            serialize_dataset(&dataset, &out, enc)?;
            eprintln!(
                "ingested {} samples ({} parse failures, {} skipped) into {}",
                report.samples,
                report.parse_failures,
                report.skipped,
                out.display()
            );
        }
        Command::Train { dataset, config, preset: preset_name, out, log, overrides } => {
            let mut run_config: RunConfig = match (&config, &preset_name) {
                (Some(path), None) => RunConfig::from_file(path)?,
                (None, Some(name)) => preset(name)?,
                (None, None) => {
                    return Err(pathcoder_cli::ConfigError::Invalid(
                        "either --config or --preset is required".into(),
                    )
                    .into())
                }
                (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
            };
            overrides.apply(&mut run_config)?;
            run_config.validate()?;
            let data = load_dataset(&dataset)?;
            let mut log_writer: Box<dyn Write> = match &log {
                Some(path) => Box::new(fs::File::create(path)?),
                None => Box::new(std::io::stderr()),
            };
            let outcome = train(&run_config, &data, &mut log_writer)?;
            outcome.best.save(&out)?;
            eprintln!(
                "saved best checkpoint (epoch {}, metric {:?}) to {}",
                outcome.best_epoch,
                outcome.best_metric,
                out.display()
            );
        }
        Command::Evaluate { dataset, checkpoint, split, out } => {
            let data = load_dataset(&dataset)?;
            let model = load_model(&data, &checkpoint)?;
            let report = evaluate(&model, &data, &split)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => fs::write(path, text)?,
                None => println!("{text}"),
            }
        }
        Command::Predict { dataset, checkpoint, split, out } => {
            let data = load_dataset(&dataset)?;
            let model = load_model(&data, &checkpoint)?;
            let mut writer = std::io::BufWriter::new(fs::File::create(&out)?);
            predict(&model, &data, &split, &mut writer)?;
            writer.flush()?;
        }
        Command::ExportEmbeddings { dataset, checkpoint, split, out } => {
            let data = load_dataset(&dataset)?;
            let model = load_model(&data, &checkpoint)?;
            let mut writer = std::io::BufWriter::new(fs::File::create(&out)?);
            let count = export_embeddings(&model, &data, &split, &mut writer)?;
            writer.flush()?;
            eprintln!("exported {count} embeddings to {}", out.display());
        }
    }
    Ok(())
}
