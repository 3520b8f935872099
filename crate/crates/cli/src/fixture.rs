//! Deterministic synthetic bilingual corpus for desk-scale experiments.
//!
//! Function bodies deliberately echo the name's subtokens (the variable is
//! the noun, the literal is the numeric suffix) so that both tasks are
//! learnable at tiny scale.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use pathcoder_ingest::SourceFunction;
use serde::{Deserialize, Serialize};

const VERBS: [&str; 8] = ["get", "set", "load", "save", "find", "read", "make", "count"];
const NOUNS: [&str; 10] =
    ["value", "item", "total", "index", "token", "node", "key", "size", "score", "depth"];
const OPS: [&str; 4] = ["+", "-", "*", "%"];

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Generate `per_language` functions for each supported language.
pub fn generate_corpus(per_language: usize) -> Vec<SourceFunction> {
    let mut corpus = Vec::with_capacity(per_language * 2);
    for i in 0..per_language {
        let verb = VERBS[i % VERBS.len()];
        let noun = NOUNS[(i / VERBS.len()) % NOUNS.len()];
        // The op is tied to the verb so the name is inferable from the body.
        let op = OPS[(i % VERBS.len()) % OPS.len()];
        let k = i % 97;
        let name = format!("{verb}{}{k}", capitalize(noun));
        corpus.push(SourceFunction {
            language: "python".into(),
            source: format!(
                "def {name}(x):\n    {noun} = x {op} {k}\n    return {noun}"
            ),
        });
        corpus.push(SourceFunction {
            language: "javascript".into(),
            source: format!(
                "function {name}(a) {{ let {noun} = a {op} {k}; return {noun}; }}"
            ),
        });
    }
    corpus
}

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    language: String,
    source: String,
}

/// Write a corpus as JSONL, one {language, source} record per line.
pub fn write_corpus(corpus: &[SourceFunction], path: &Path) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for f in corpus {
        let record =
            CorpusRecord { language: f.language.clone(), source: f.source.clone() };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_corpus(path: &Path) -> anyhow::Result<Vec<SourceFunction>> {
    let mut corpus = Vec::new();
    for line in BufReader::new(std::fs::File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line)?;
        corpus.push(SourceFunction { language: record.language, source: record.source });
    }
    Ok(corpus)
}
