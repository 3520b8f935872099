//! Subtoken and node-type vocabularies with deterministic id assignment.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{IngestError, Result};
use crate::paths::{DOWN, UP};
use crate::split::split_identifier;
use crate::tree::SyntaxTree;

/// Special subtoken strings, in id order 0..=5.
pub const SPECIALS: [&str; 6] = ["<PAD>", "<UNK>", "<MASK>", "<BOS>", "<EOS>", "<NAME>"];
pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const MASK: u32 = 2;
pub const BOS: u32 = 3;
pub const EOS: u32 = 4;
pub const NAME: u32 = 5;

/// Node-type vocabulary reserved ids: 0 pads path slots, 1 covers types
/// unseen in the training split.
pub const NODE_PAD: u32 = 0;
pub const NODE_UNK: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabularyDto", into = "VocabularyDto")]
pub struct Vocabulary {
    subtokens: Vec<String>,
    node_types: Vec<String>,
    min_count: u32,
    subtoken_index: HashMap<String, u32>,
    node_index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyDto {
    subtokens: Vec<String>,
    node_types: Vec<String>,
    min_count: u32,
}

impl From<VocabularyDto> for Vocabulary {
    fn from(dto: VocabularyDto) -> Self {
        Vocabulary::from_lists(dto.subtokens, dto.node_types, dto.min_count)
    }
}

impl From<Vocabulary> for VocabularyDto {
    fn from(v: Vocabulary) -> Self {
        VocabularyDto { subtokens: v.subtokens, node_types: v.node_types, min_count: v.min_count }
    }
}

/// Order counted items by frequency (descending) then lexicographically.
fn ranked(counts: BTreeMap<String, u64>) -> Vec<String> {
    let mut items: Vec<(String, u64)> = counts.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.into_iter().map(|(s, _)| s).collect()
}

impl Vocabulary {
    fn from_lists(subtokens: Vec<String>, node_types: Vec<String>, min_count: u32) -> Self {
        let index = |list: &[String]| {
            list.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect::<HashMap<_, _>>()
        };
        let subtoken_index = index(&subtokens);
        let node_index = index(&node_types);
        Vocabulary { subtokens, node_types, min_count, subtoken_index, node_index }
    }

    /// Build both vocabularies from training-split functions only.
    pub fn build(corpus: &[crate::sample::ParsedFunction], min_count: u32) -> Result<Vocabulary> {
        Self::build_from_iter(corpus.iter(), min_count)
    }

    pub fn build_from_iter<'a, I>(corpus: I, min_count: u32) -> Result<Vocabulary>
    where
        I: IntoIterator<Item = &'a crate::sample::ParsedFunction>,
    {
        let mut seen = false;
        let mut sub_counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut node_counts: BTreeMap<String, u64> = BTreeMap::new();
        for func in corpus {
            seen = true;
            for piece in &func.subtokens {
                *sub_counts.entry(piece.clone()).or_default() += 1;
            }
            count_node_types(&func.tree, &mut node_counts);
        }
        if !seen {
            return Err(IngestError::EmptyCorpus);
        }
        let mut subtokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        sub_counts.retain(|_, &mut c| c >= u64::from(min_count));
        subtokens.extend(ranked(sub_counts));
        let mut node_types = vec!["<PAD>".to_string(), "<UNK>".to_string()];
        node_types.extend(ranked(node_counts));
        Ok(Vocabulary::from_lists(subtokens, node_types, min_count))
    }

    pub fn subtoken_id(&self, piece: &str) -> u32 {
        self.subtoken_index.get(piece).copied().unwrap_or(UNK)
    }

    pub fn node_id(&self, type_label: &str) -> u32 {
        self.node_index.get(type_label).copied().unwrap_or(NODE_UNK)
    }

    pub fn subtoken(&self, id: u32) -> &str {
        &self.subtokens[id as usize]
    }

    pub fn len(&self) -> usize {
        self.subtokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node_len(&self) -> usize {
        self.node_types.len()
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn hash(&self) -> String {
        hash_list(&self.subtokens)
    }

    pub fn node_hash(&self) -> String {
        hash_list(&self.node_types)
    }
}

fn hash_list(list: &[String]) -> String {
    let mut hasher = Sha256::new();
    for item in list {
        hasher.update(item.as_bytes());
        hasher.update([0u8]);
    }
    format!("{:x}", hasher.finalize())
}

/// Each observed node type contributes its unmarked form plus both
/// direction-fused variants, so any path element over training-split trees
/// has an id.
fn count_node_types(tree: &SyntaxTree, counts: &mut BTreeMap<String, u64>) {
    for node in &tree.nodes {
        *counts.entry(node.type_label.clone()).or_default() += 1;
        *counts.entry(format!("{}{UP}", node.type_label)).or_default() += 1;
        *counts.entry(format!("{}{DOWN}", node.type_label)).or_default() += 1;
    }
}

/// Split every retained token and count the pieces; exposed for tests.
pub fn subtoken_pieces(tokens: &[(String, usize)]) -> Vec<String> {
    tokens.iter().flat_map(|(text, _)| split_identifier(text)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::ParsedFunction;

    fn corpus_from(sources: &[&str]) -> Vec<ParsedFunction> {
        sources.iter().map(|s| ParsedFunction::parse(s, "python").unwrap()).collect()
    }

    #[test]
    fn specials_occupy_fixed_low_ids() {
        let corpus = corpus_from(&["def f(x):\n  return x"]);
        let v = Vocabulary::build(&corpus, 1).unwrap();
        for (i, s) in SPECIALS.iter().enumerate() {
            assert_eq!(v.subtoken_id(s), i as u32);
            assert_eq!(v.subtoken(i as u32), *s);
        }
        assert_eq!(v.node_id("<PAD>"), NODE_PAD);
        assert_eq!(v.node_id("<UNK>"), NODE_UNK);
        assert_eq!(v.node_id("never_seen_type"), NODE_UNK);
    }

    #[test]
    fn min_count_threshold_applies() {
        // "foo" appears 3 times, "bar" once.
        let corpus = corpus_from(&["def foo():\n  foo = foo\n  return bar"]);
        let v = Vocabulary::build(&corpus, 2).unwrap();
        assert_ne!(v.subtoken_id("foo"), UNK);
        assert_eq!(v.subtoken_id("bar"), UNK);

        let v1 = Vocabulary::build(&corpus, 1).unwrap();
        assert_ne!(v1.subtoken_id("bar"), UNK);
    }

    #[test]
    fn ids_are_frequency_then_lexicographic() {
        let corpus = corpus_from(&["def f():\n  bb = bb\n  aa = bb\n  cc = aa"]);
        let v = Vocabulary::build(&corpus, 1).unwrap();
        // bb ×3, aa ×2, cc ×1; ties would fall back to lexicographic order.
        assert!(v.subtoken_id("bb") < v.subtoken_id("aa"));
        assert!(v.subtoken_id("aa") < v.subtoken_id("cc"));
    }

    #[test]
    fn rebuild_is_deterministic() {
        let corpus = corpus_from(&["def f(x):\n  return x + yak", "def g(a):\n  return a"]);
        let a = Vocabulary::build(&corpus, 1).unwrap();
        let b = Vocabulary::build(&corpus, 1).unwrap();
        assert_eq!(a.subtokens, b.subtokens);
        assert_eq!(a.node_types, b.node_types);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.node_hash(), b.node_hash());
    }

    #[test]
    fn node_vocab_has_direction_fused_variants() {
        let corpus = corpus_from(&["def f(x):\n  return x"]);
        let v = Vocabulary::build(&corpus, 1).unwrap();
        for t in ["identifier", "block", "return_statement", "module"] {
            assert_ne!(v.node_id(t), NODE_UNK, "{t}");
            assert_ne!(v.node_id(&format!("{t}{UP}")), NODE_UNK);
            assert_ne!(v.node_id(&format!("{t}{DOWN}")), NODE_UNK);
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(Vocabulary::build(&[], 1), Err(IngestError::EmptyCorpus)));
    }

    #[test]
    fn serde_round_trip_preserves_lookup() {
        let corpus = corpus_from(&["def f(x):\n  return x"]);
        let v = Vocabulary::build(&corpus, 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.subtoken_id("return"), v.subtoken_id("return"));
        assert_eq!(back.node_id("module"), v.node_id("module"));
        assert_eq!(back.hash(), v.hash());
    }
}
