//! Tree-sitter parsing into a compact named-node tree.
//!
//! The tree keeps only named grammar nodes; every source token (including
//! anonymous keywords and punctuation) is recorded separately and mapped to
//! its innermost covering named node, which is the node paths are computed
//! between.

use crate::error::{IngestError, Result};

/// Registered languages, in dense code order.
pub const LANGUAGES: [&str; 2] = ["python", "javascript"];

pub fn language_code(name: &str) -> Option<usize> {
    LANGUAGES.iter().position(|&l| l == name)
}

#[derive(Debug, Clone)]
pub struct NodeInfo {
    pub type_label: String,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Grammar field name binding this node to its parent, when any.
    pub field: Option<String>,
    pub byte_span: (usize, usize),
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct TokenInfo {
    pub text: String,
    /// Index of the innermost named node covering this token.
    pub node: usize,
    pub byte_span: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct SyntaxTree {
    /// Named nodes, root first; children are ordered.
    pub nodes: Vec<NodeInfo>,
    /// All source tokens in source order.
    pub tokens: Vec<TokenInfo>,
}

impl SyntaxTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn node_of_token(&self, token: usize) -> Result<usize> {
        self.tokens.get(token).map(|t| t.node).ok_or(IngestError::IndexError(token))
    }
}

fn grammar_for(language: &str) -> Result<tree_sitter::Language> {
    match language {
        "python" => Ok(tree_sitter_python::LANGUAGE.into()),
        "javascript" => Ok(tree_sitter_javascript::LANGUAGE.into()),
        other => Err(IngestError::UnsupportedLanguage(other.to_string())),
    }
}

/// Parse one complete function definition.
pub fn parse_source(source: &str, language: &str) -> Result<SyntaxTree> {
    let grammar = grammar_for(language)?;
    if source.trim().is_empty() {
        return Err(IngestError::ParseError("empty source".into()));
    }
    let mut parser = tree_sitter::Parser::new();
    parser
        .set_language(&grammar)
        .map_err(|e| IngestError::ParseError(format!("grammar load failed: {e}")))?;
    let tree = parser
        .parse(source, None)
        .ok_or_else(|| IngestError::ParseError("parser returned no tree".into()))?;
    let root = tree.root_node();
    if root.has_error() {
        return Err(IngestError::ParseError(format!(
            "grammar rejected input: {}",
            root.to_sexp().chars().take(120).collect::<String>()
        )));
    }
    let mut out = SyntaxTree { nodes: Vec::new(), tokens: Vec::new() };
    walk(root, None, None, 0, source.as_bytes(), &mut out);
    if out.tokens.is_empty() {
        return Err(IngestError::ParseError("no tokens in source".into()));
    }
    Ok(out)
}

fn walk(
    node: tree_sitter::Node,
    parent_named: Option<usize>,
    field: Option<&str>,
    depth: usize,
    source: &[u8],
    out: &mut SyntaxTree,
) {
    let covering = if node.is_named() {
        let idx = out.nodes.len();
        out.nodes.push(NodeInfo {
            type_label: node.kind().to_string(),
            parent: parent_named,
            children: Vec::new(),
            field: field.map(str::to_string),
            byte_span: (node.start_byte(), node.end_byte()),
            depth,
        });
        if let Some(p) = parent_named {
            out.nodes[p].children.push(idx);
        }
        Some(idx)
    } else {
        parent_named
    };
    if node.child_count() == 0 {
        let covering = covering.expect("token outside any named node");
        let text = String::from_utf8_lossy(&source[node.start_byte()..node.end_byte()]).to_string();
        out.tokens.push(TokenInfo {
            text,
            node: covering,
            byte_span: (node.start_byte(), node.end_byte()),
        });
        return;
    }
    let next_depth = if node.is_named() { depth + 1 } else { depth };
    let mut cursor = node.walk();
    let mut went_down = cursor.goto_first_child();
    while went_down {
        let child_field = cursor.field_name();
        walk(cursor.node(), covering, child_field, next_depth, source, out);
        went_down = cursor.goto_next_sibling();
    }
}
