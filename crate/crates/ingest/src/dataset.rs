//! On-disk dataset format: a manifest plus vocab, path-table, and per-split
//! sample files in either JSONL or length-prefixed binary encoding.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};
use crate::sample::{CodeSample, PathTable};
use crate::vocab::Vocabulary;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleEncoding {
    Jsonl,
    Binary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub task: String,
    pub encoding: SampleEncoding,
    /// Language names in dense code order.
    pub languages: Vec<String>,
    pub vocab_file: String,
    pub path_table_file: String,
    /// Split name → sample file, e.g. train/valid/test.
    pub splits: BTreeMap<String, String>,
    pub vocab_hash: String,
    pub node_vocab_hash: String,
}

#[derive(Debug)]
pub struct Dataset {
    pub task: String,
    pub languages: Vec<String>,
    pub vocab: Vocabulary,
    pub path_table: PathTable,
    pub splits: BTreeMap<String, Vec<CodeSample>>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Result<&[CodeSample]> {
        self.splits
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| IngestError::CorruptFile(format!("no split named {name:?}")))
    }
}

pub fn serialize_dataset(
    dataset: &Dataset,
    destination: &Path,
    encoding: SampleEncoding,
) -> Result<()> {
    fs::create_dir_all(destination)?;
    let ext = match encoding {
        SampleEncoding::Jsonl => "jsonl",
        SampleEncoding::Binary => "bin",
    };
    let mut split_files = BTreeMap::new();
    for (name, samples) in &dataset.splits {
        let file_name = format!("samples.{name}.{ext}");
        let mut writer = BufWriter::new(fs::File::create(destination.join(&file_name))?);
        for sample in samples {
            let line = serde_json::to_vec(sample)
                .map_err(|e| IngestError::CorruptFile(e.to_string()))?;
            match encoding {
                SampleEncoding::Jsonl => {
                    writer.write_all(&line)?;
                    writer.write_all(b"\n")?;
                }
                SampleEncoding::Binary => {
                    writer.write_all(&(line.len() as u32).to_le_bytes())?;
                    writer.write_all(&line)?;
                }
            }
        }
        writer.flush()?;
        split_files.insert(name.clone(), file_name);
    }
    let write_json = |name: &str, value: &str| -> Result<()> {
        fs::write(destination.join(name), value)?;
        Ok(())
    };
    write_json(
        "vocab.json",
        &serde_json::to_string_pretty(&dataset.vocab)
            .map_err(|e| IngestError::CorruptFile(e.to_string()))?,
    )?;
    write_json(
        "path_table.json",
        &serde_json::to_string(&dataset.path_table)
            .map_err(|e| IngestError::CorruptFile(e.to_string()))?,
    )?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        task: dataset.task.clone(),
        encoding,
        languages: dataset.languages.clone(),
        vocab_file: "vocab.json".into(),
        path_table_file: "path_table.json".into(),
        splits: split_files,
        vocab_hash: dataset.vocab.hash(),
        node_vocab_hash: dataset.vocab.node_hash(),
    };
    write_json(
        "manifest.json",
        &serde_json::to_string_pretty(&manifest)
            .map_err(|e| IngestError::CorruptFile(e.to_string()))?,
    )?;
    Ok(())
}

pub fn load_manifest(source: &Path) -> Result<Manifest> {
    let raw = fs::read_to_string(source.join("manifest.json"))?;
    let manifest: Manifest =
        serde_json::from_str(&raw).map_err(|e| IngestError::CorruptFile(e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(IngestError::FormatVersionMismatch {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(manifest)
}

pub fn load_dataset(source: &Path) -> Result<Dataset> {
    let manifest = load_manifest(source)?;
    let vocab: Vocabulary =
        serde_json::from_str(&fs::read_to_string(source.join(&manifest.vocab_file))?)
            .map_err(|e| IngestError::CorruptFile(e.to_string()))?;
    let path_table: PathTable =
        serde_json::from_str(&fs::read_to_string(source.join(&manifest.path_table_file))?)
            .map_err(|e| IngestError::CorruptFile(e.to_string()))?;
    if vocab.hash() != manifest.vocab_hash || vocab.node_hash() != manifest.node_vocab_hash {
        return Err(IngestError::CorruptFile("vocabulary hash mismatch".into()));
    }
    let mut splits = BTreeMap::new();
    for (name, file) in &manifest.splits {
        let samples = read_samples(&source.join(file), manifest.encoding)?;
        // Referential integrity: every path id must exist in the table.
        for s in &samples {
            for &id in s.rel_path_ref.iter().chain(&s.abs_path_ref) {
                if path_table.get(id).is_none() {
                    return Err(IngestError::CorruptFile(format!(
                        "sample {} references missing path id {id}",
                        s.id
                    )));
                }
            }
            if usize::from(s.language) >= manifest.languages.len() {
                return Err(IngestError::CorruptFile(format!(
                    "sample {} has out-of-range language code {}",
                    s.id, s.language
                )));
            }
        }
        splits.insert(name.clone(), samples);
    }
    Ok(Dataset {
        task: manifest.task,
        languages: manifest.languages,
        vocab,
        path_table,
        splits,
    })
}

fn read_samples(path: &Path, encoding: SampleEncoding) -> Result<Vec<CodeSample>> {
    let mut out = Vec::new();
    match encoding {
        SampleEncoding::Jsonl => {
            for line in BufReader::new(fs::File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                out.push(
                    serde_json::from_str(&line)
                        .map_err(|e| IngestError::CorruptFile(e.to_string()))?,
                );
            }
        }
        SampleEncoding::Binary => {
            let mut reader = BufReader::new(fs::File::open(path)?);
            loop {
                let mut len_buf = [0u8; 4];
                match reader.read_exact(&mut len_buf) {
                    Ok(()) => {}
                    Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                    Err(e) => return Err(e.into()),
                }
                let len = u32::from_le_bytes(len_buf) as usize;
                let mut buf = vec![0u8; len];
                reader.read_exact(&mut buf).map_err(|_| {
                    IngestError::CorruptFile("truncated record".into())
                })?;
                out.push(
                    serde_json::from_slice(&buf)
                        .map_err(|e| IngestError::CorruptFile(e.to_string()))?,
                );
            }
        }
    }
    Ok(out)
}
