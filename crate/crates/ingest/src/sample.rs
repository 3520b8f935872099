//! Task-ready samples: parsed functions, the deduplicating path table, and
//! the summarization / completion sample builders.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IngestError, Result};
use crate::paths::{absolute_path, leaf_tokens, relative_path, resample_path, EulerLca};
use crate::split::split_identifier;
use crate::tree::{language_code, parse_source, SyntaxTree};
use crate::vocab::{Vocabulary, EOS, NAME};

pub const MAX_SEQ_LEN: usize = 512;
pub const MAX_PATH_LEN: usize = 32;

/// Deduplicated node-type-id sequences; id 0 is the reserved empty path.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "PathTableDto", into = "PathTableDto")]
pub struct PathTable {
    entries: Vec<Vec<u32>>,
    index: BTreeMap<Vec<u32>, u32>,
}

#[derive(Serialize, Deserialize)]
struct PathTableDto {
    entries: Vec<Vec<u32>>,
}

impl From<PathTableDto> for PathTable {
    fn from(dto: PathTableDto) -> Self {
        let index = dto
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();
        PathTable { entries: dto.entries, index }
    }
}

impl From<PathTable> for PathTableDto {
    fn from(t: PathTable) -> Self {
        PathTableDto { entries: t.entries }
    }
}

impl PathTable {
    pub fn new() -> Self {
        let empty: Vec<u32> = Vec::new();
        PathTable { entries: vec![empty.clone()], index: BTreeMap::from([(empty, 0)]) }
    }

    /// Intern a path, returning its stable id. The empty path is always id 0.
    pub fn intern(&mut self, path: Vec<u32>) -> u32 {
        assert!(path.len() <= MAX_PATH_LEN, "paths must be resampled before interning");
        if let Some(&id) = self.index.get(&path) {
            return id;
        }
        let id = self.entries.len() as u32;
        self.entries.push(path.clone());
        self.index.insert(path, id);
        id
    }

    pub fn get(&self, id: u32) -> Option<&[u32]> {
        self.entries.get(id as usize).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All entries, indexed by id.
    pub fn entries(&self) -> &[Vec<u32>] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Target {
    /// Method-name subtokens terminated by <EOS>.
    Summarization { tokens: Vec<u32> },
    Completion { mask_position: u32, answer_id: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSample {
    pub id: String,
    pub language: u16,
    pub subtokens: Vec<u32>,
    /// Token index (into the parsed function's token list) per subtoken.
    pub leaf_of: Vec<u32>,
    /// Row-major n×n matrix of PathTable ids over subtoken position pairs.
    pub rel_path_ref: Vec<u32>,
    /// PathTable id of the root path per subtoken position.
    pub abs_path_ref: Vec<u32>,
    pub target: Target,
}

impl CodeSample {
    pub fn len(&self) -> usize {
        self.subtokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtokens.is_empty()
    }
}

/// The function's defining name, when present.
#[derive(Debug, Clone)]
pub struct NameInfo {
    pub text: String,
    /// Token indices whose text equals the name.
    pub occurrences: Vec<usize>,
}

/// A parsed function with its subtoken view, ready for sample construction.
#[derive(Debug)]
pub struct ParsedFunction {
    pub language: u16,
    pub tree: SyntaxTree,
    /// Subtoken strings in source order.
    pub subtokens: Vec<String>,
    /// Token index per subtoken.
    pub leaf_of: Vec<usize>,
    pub name: Option<NameInfo>,
}

/// Node types that define a named function in the supported grammars.
const DEFINITION_TYPES: [&str; 4] =
    ["function_definition", "function_declaration", "method_definition", "generator_function_declaration"];

impl ParsedFunction {
    pub fn parse(source: &str, language: &str) -> Result<ParsedFunction> {
        let code = language_code(language)
            .ok_or_else(|| IngestError::UnsupportedLanguage(language.to_string()))? as u16;
        let tree = parse_source(source, language)?;
        let retained = leaf_tokens(&tree);
        let mut subtokens = Vec::new();
        let mut leaf_of = Vec::new();
        for (text, token) in &retained {
            for piece in split_identifier(text) {
                subtokens.push(piece);
                leaf_of.push(*token);
            }
        }
        let name = find_name(&tree);
        Ok(ParsedFunction { language: code, tree, subtokens, leaf_of, name })
    }
}

/// The identifier bound to a definition node through its `name` field.
fn find_name(tree: &SyntaxTree) -> Option<NameInfo> {
    let name_node = tree.nodes.iter().position(|n| {
        n.type_label == "identifier"
            && n.field.as_deref() == Some("name")
            && n.parent
                .is_some_and(|p| DEFINITION_TYPES.contains(&tree.nodes[p].type_label.as_str()))
    })?;
    let text = tree
        .tokens
        .iter()
        .find(|t| t.node == name_node)
        .map(|t| t.text.clone())?;
    let occurrences = tree
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.text == text)
        .map(|(i, _)| i)
        .collect();
    Some(NameInfo { text, occurrences })
}

/// Compute (and intern) the pairwise and root paths for a truncated subtoken
/// view. Paths are deduplicated per leaf pair before interning.
fn build_paths(
    func: &ParsedFunction,
    leaf_of: &[usize],
    vocab: &Vocabulary,
    table: &mut PathTable,
) -> Result<(Vec<u32>, Vec<u32>)> {
    let n = leaf_of.len();
    let lca = EulerLca::new(&func.tree);
    let mut pair_cache: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    let mut abs_cache: BTreeMap<usize, u32> = BTreeMap::new();
    let mut rel = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            let key = (leaf_of[i], leaf_of[j]);
            let id = match pair_cache.get(&key) {
                Some(&id) => id,
                None => {
                    let path = relative_path(&func.tree, &lca, key.0, key.1)?;
                    let ids: Vec<u32> = path.iter().map(|t| vocab.node_id(t)).collect();
                    let id = table.intern(resample_path(&ids, MAX_PATH_LEN));
                    pair_cache.insert(key, id);
                    id
                }
            };
            rel[i * n + j] = id;
        }
    }
    let mut abs = Vec::with_capacity(n);
    for &leaf in leaf_of {
        let id = match abs_cache.get(&leaf) {
            Some(&id) => id,
            None => {
                let path = absolute_path(&func.tree, leaf)?;
                let ids: Vec<u32> = path.iter().map(|t| vocab.node_id(t)).collect();
                let id = table.intern(resample_path(&ids, MAX_PATH_LEN));
                abs_cache.insert(leaf, id);
                id
            }
        };
        abs.push(id);
    }
    Ok((rel, abs))
}

/// Summarization sample: every occurrence of the defined name becomes one
/// <NAME> position; the target is the name's subtokens plus <EOS>.
pub fn make_summarization_sample(
    func: &ParsedFunction,
    vocab: &Vocabulary,
    table: &mut PathTable,
    id: String,
) -> Result<CodeSample> {
    let name = func.name.as_ref().ok_or(IngestError::NoName)?;
    let mut subtokens = Vec::new();
    let mut leaf_of = Vec::new();
    let mut pos = 0;
    while pos < func.subtokens.len() {
        let token = func.leaf_of[pos];
        if name.occurrences.contains(&token) {
            subtokens.push(NAME);
            leaf_of.push(token);
            while pos < func.subtokens.len() && func.leaf_of[pos] == token {
                pos += 1;
            }
        } else {
            subtokens.push(vocab.subtoken_id(&func.subtokens[pos]));
            leaf_of.push(token);
            pos += 1;
        }
    }
    subtokens.truncate(MAX_SEQ_LEN);
    leaf_of.truncate(MAX_SEQ_LEN);
    let (rel, abs) = build_paths(func, &leaf_of, vocab, table)?;
    let mut target: Vec<u32> =
        split_identifier(&name.text).iter().map(|p| vocab.subtoken_id(p)).collect();
    target.push(EOS);
    Ok(CodeSample {
        id,
        language: func.language,
        subtokens,
        leaf_of: leaf_of.iter().map(|&l| l as u32).collect(),
        rel_path_ref: rel,
        abs_path_ref: abs,
        target: Target::Summarization { tokens: target },
    })
}

/// Completion sample: one subtoken position chosen uniformly with the seeded
/// generator is replaced by <MASK>; the answer is the original id.
pub fn make_completion_sample(
    func: &ParsedFunction,
    vocab: &Vocabulary,
    table: &mut PathTable,
    id: String,
    seed: u64,
) -> Result<CodeSample> {
    if func.subtokens.len() < 2 {
        return Err(IngestError::TooShort);
    }
    let mut subtokens: Vec<u32> =
        func.subtokens.iter().map(|p| vocab.subtoken_id(p)).collect();
    let mut leaf_of = func.leaf_of.clone();
    subtokens.truncate(MAX_SEQ_LEN);
    leaf_of.truncate(MAX_SEQ_LEN);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask_position = rng.gen_range(0..subtokens.len());
    let answer_id = subtokens[mask_position];
    subtokens[mask_position] = crate::vocab::MASK;
    let (rel, abs) = build_paths(func, &leaf_of, vocab, table)?;
    Ok(CodeSample {
        id,
        language: func.language,
        subtokens,
        leaf_of: leaf_of.iter().map(|&l| l as u32).collect(),
        rel_path_ref: rel,
        abs_path_ref: abs,
        target: Target::Completion {
            mask_position: mask_position as u32,
            answer_id,
        },
    })
}
