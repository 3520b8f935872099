//! AST path extraction: punctuation filtering, lowest common ancestors via
//! a single Euler tour, and the relative/absolute path operations.

use crate::error::Result;
use crate::tree::SyntaxTree;

pub const UP: char = '\u{2191}'; // ↑
pub const DOWN: char = '\u{2193}'; // ↓

/// Source-ordered retained tokens: punctuation (no letters or digits) is
/// dropped. Returns (token text, token index) pairs.
pub fn leaf_tokens(tree: &SyntaxTree) -> Vec<(String, usize)> {
    tree.tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.text.chars().any(|c| c.is_alphanumeric()))
        .map(|(i, t)| (t.text.clone(), i))
        .collect()
}

/// Constant-time LCA queries over one tree, built from a single Euler tour.
pub struct EulerLca {
    /// Node index at each tour step.
    tour: Vec<usize>,
    /// Depth at each tour step.
    depth: Vec<usize>,
    /// First tour step touching each node.
    first: Vec<usize>,
    /// Sparse table of minimum-depth tour positions.
    table: Vec<Vec<usize>>,
}

impl EulerLca {
    pub fn new(tree: &SyntaxTree) -> Self {
        let n = tree.nodes.len();
        let mut tour = Vec::with_capacity(2 * n);
        let mut depth = Vec::with_capacity(2 * n);
        let mut first = vec![usize::MAX; n];
        // Iterative Euler tour; (node, next child index to visit).
        let mut stack = vec![(tree.root(), 0usize)];
        while let Some(&mut (node, ref mut child)) = stack.last_mut() {
            if *child == 0 || *child <= tree.nodes[node].children.len() {
                if first[node] == usize::MAX {
                    first[node] = tour.len();
                }
                tour.push(node);
                depth.push(tree.nodes[node].depth);
            }
            if *child < tree.nodes[node].children.len() {
                let next = tree.nodes[node].children[*child];
                *child += 1;
                stack.push((next, 0));
            } else {
                stack.pop();
            }
        }
        let m = tour.len();
        let levels = (usize::BITS - m.leading_zeros()) as usize;
        let mut table = Vec::with_capacity(levels);
        table.push((0..m).collect::<Vec<_>>());
        let mut span = 1;
        while span * 2 <= m {
            let prev = table.last().unwrap();
            let row: Vec<usize> = (0..=m - span * 2)
                .map(|i| {
                    let (a, b) = (prev[i], prev[i + span]);
                    if depth[a] <= depth[b] {
                        a
                    } else {
                        b
                    }
                })
                .collect();
            table.push(row);
            span *= 2;
        }
        EulerLca { tour, depth, first, table }
    }

    pub fn lca(&self, a: usize, b: usize) -> usize {
        let (mut lo, mut hi) = (self.first[a], self.first[b]);
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let len = hi - lo + 1;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let x = self.table[level][lo];
        let y = self.table[level][hi + 1 - (1 << level)];
        self.tour[if self.depth[x] <= self.depth[y] { x } else { y }]
    }
}

fn chain_to_ancestor(tree: &SyntaxTree, mut node: usize, ancestor: usize) -> Vec<usize> {
    let mut chain = Vec::new();
    while node != ancestor {
        chain.push(node);
        node = tree.nodes[node].parent.expect("ancestor not on path to root");
    }
    chain
}

/// Node-type sequence from token i to token j through their LCA, endpoints
/// inclusive. Ascending types carry the up marker, descending ones the down
/// marker, the LCA stays unmarked. The self path (and any pair of tokens
/// covered by the same named node) is empty.
pub fn relative_path(
    tree: &SyntaxTree,
    lca: &EulerLca,
    token_i: usize,
    token_j: usize,
) -> Result<Vec<String>> {
    let a = tree.node_of_token(token_i)?;
    let b = tree.node_of_token(token_j)?;
    if a == b {
        return Ok(Vec::new());
    }
    let anc = lca.lca(a, b);
    let mut out = Vec::new();
    for n in chain_to_ancestor(tree, a, anc) {
        out.push(format!("{}{UP}", tree.nodes[n].type_label));
    }
    out.push(tree.nodes[anc].type_label.clone());
    let down = chain_to_ancestor(tree, b, anc);
    for n in down.iter().rev() {
        out.push(format!("{}{DOWN}", tree.nodes[*n].type_label));
    }
    Ok(out)
}

/// Node types from the root down to the token's covering node, inclusive,
/// root first. Unmarked.
pub fn absolute_path(tree: &SyntaxTree, token_i: usize) -> Result<Vec<String>> {
    let node = tree.node_of_token(token_i)?;
    let mut chain = chain_to_ancestor(tree, node, tree.root());
    chain.push(tree.root());
    chain.reverse();
    Ok(chain.into_iter().map(|n| tree.nodes[n].type_label.clone()).collect())
}

/// Equal-interval downsampling: paths of length > max_len keep the elements
/// at indices floor(k * len / max_len), k = 0..max_len-1.
pub fn resample_path<T: Clone>(path: &[T], max_len: usize) -> Vec<T> {
    assert!(max_len >= 1);
    if path.len() <= max_len {
        return path.to_vec();
    }
    (0..max_len).map(|k| path[k * path.len() / max_len].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::IngestError;
    use crate::tree::parse_source;

    const GOLDEN_PY: &str = "def f(x):\n  return x";

    fn golden() -> (SyntaxTree, EulerLca) {
        let t = parse_source(GOLDEN_PY, "python").unwrap();
        let l = EulerLca::new(&t);
        (t, l)
    }

    #[test]
    fn punctuation_filter_golden() {
        let (t, _) = golden();
        let texts: Vec<String> = leaf_tokens(&t).into_iter().map(|(s, _)| s).collect();
        assert_eq!(texts, ["def", "f", "x", "return", "x"]);
        assert!(leaf_tokens(&t).len() <= t.tokens.len());
    }

    #[test]
    fn self_path_is_empty() {
        let (t, l) = golden();
        assert!(relative_path(&t, &l, 1, 1).unwrap().is_empty());
    }

    #[test]
    fn golden_relative_path_f_to_returned_x() {
        let (t, l) = golden();
        // token 1 = "f", token 7 = the returned "x"
        let path = relative_path(&t, &l, 1, 7).unwrap();
        assert_eq!(
            path,
            [
                format!("identifier{UP}"),
                "function_definition".to_string(),
                format!("block{DOWN}"),
                format!("return_statement{DOWN}"),
                format!("identifier{DOWN}"),
            ]
        );
    }

    #[test]
    fn reversal_flips_direction_markers() {
        let (t, l) = golden();
        let flip = |s: &str| {
            if let Some(base) = s.strip_suffix(UP) {
                format!("{base}{DOWN}")
            } else if let Some(base) = s.strip_suffix(DOWN) {
                format!("{base}{UP}")
            } else {
                s.to_string()
            }
        };
        for i in 0..t.tokens.len() {
            for j in 0..t.tokens.len() {
                let ab = relative_path(&t, &l, i, j).unwrap();
                let ba = relative_path(&t, &l, j, i).unwrap();
                let flipped: Vec<String> = ba.iter().rev().map(|s| flip(s)).collect();
                assert_eq!(ab, flipped, "tokens {i} {j}");
            }
        }
    }

    #[test]
    fn golden_absolute_path_return() {
        let (t, _) = golden();
        // token 6 = the "return" keyword, covered by return_statement
        assert_eq!(
            absolute_path(&t, 6).unwrap(),
            ["module", "function_definition", "block", "return_statement"]
        );
        // First element is always the root type; last is the token's node.
        for i in 0..t.tokens.len() {
            let p = absolute_path(&t, i).unwrap();
            assert_eq!(p[0], "module");
            assert_eq!(*p.last().unwrap(), t.nodes[t.tokens[i].node].type_label);
        }
    }

    #[test]
    fn out_of_range_token_is_index_error() {
        let (t, l) = golden();
        assert!(matches!(relative_path(&t, &l, 0, 99), Err(IngestError::IndexError(99))));
        assert!(matches!(absolute_path(&t, 99), Err(IngestError::IndexError(99))));
    }

    #[test]
    fn minimal_two_leaf_tree_path() {
        // Two identifiers under one expression: [A↑, P, B↓].
        let t = parse_source("a+b", "python").unwrap();
        let l = EulerLca::new(&t);
        let toks = leaf_tokens(&t);
        assert_eq!(toks.len(), 2);
        let path = relative_path(&t, &l, toks[0].1, toks[1].1).unwrap();
        assert_eq!(path.first().unwrap(), &format!("identifier{UP}"));
        assert_eq!(path.last().unwrap(), &format!("identifier{DOWN}"));
        assert_eq!(path.len(), 3);
    }

    #[test]
    fn resample_formula_goldens() {
        let short: Vec<usize> = (0..10).collect();
        assert_eq!(resample_path(&short, 32), short);

        let p64: Vec<usize> = (0..64).collect();
        let expect: Vec<usize> = (0..32).map(|k| 2 * k).collect();
        assert_eq!(resample_path(&p64, 32), expect);

        // len 33: floor(k*33/32) keeps indices 0..=31 and drops the last.
        let p33: Vec<usize> = (0..33).collect();
        let got = resample_path(&p33, 32);
        let expect: Vec<usize> = (0..32).map(|k| k * 33 / 32).collect();
        assert_eq!(got, expect);
        assert_eq!(got, (0..32).collect::<Vec<_>>());

        let p100: Vec<usize> = (0..100).collect();
        let got = resample_path(&p100, 32);
        let expect: Vec<usize> = (0..32).map(|k| k * 100 / 32).collect();
        assert_eq!(got, expect);
        assert_eq!(got.len(), 32);
    }

    #[test]
    fn lca_agrees_with_parent_chain_walk() {
        let t = parse_source(
            "def g(a, b):\n  if a:\n    return b\n  else:\n    return a + b",
            "python",
        )
        .unwrap();
        let l = EulerLca::new(&t);
        let naive = |mut a: usize, mut b: usize| {
            while t.nodes[a].depth > t.nodes[b].depth {
                a = t.nodes[a].parent.unwrap();
            }
            while t.nodes[b].depth > t.nodes[a].depth {
                b = t.nodes[b].parent.unwrap();
            }
            while a != b {
                a = t.nodes[a].parent.unwrap();
                b = t.nodes[b].parent.unwrap();
            }
            a
        };
        for a in 0..t.nodes.len() {
            for b in 0..t.nodes.len() {
                assert_eq!(l.lca(a, b), naive(a, b), "nodes {a} {b}");
            }
        }
    }
}
