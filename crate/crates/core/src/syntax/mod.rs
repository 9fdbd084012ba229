//! Syntax trees over questions.
//!
//! Both dependency (CoNLL-U) and constituency (bracketed) parses are mapped
//! onto one [`SyntaxTree`] shape: every node dominates a set of token indices
//! (its sub-phrase) and knows its parent and children. [`prune`] marks nodes
//! that are not worth a retrieval round, and [`traversal_order`] yields the
//! children-first processing order used by the pipeline.

mod conllu;
mod prune;
mod ptb;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conllu::{parse_conllu, to_conllu};
pub use prune::{prune, LeafMode, PrunePolicy};
pub use ptb::{parse_ptb, to_ptb};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("malformed CoNLL-U at line {line}: {reason}")]
    MalformedConllu { line: usize, reason: String },
    #[error("multiple root tokens (HEAD=0) at ids {0:?}")]
    MultipleRoots(Vec<usize>),
    #[error("cyclic head assignment involving token {0}")]
    CyclicHeads(usize),
    #[error("unbalanced brackets at offset {0}")]
    UnbalancedBrackets(usize),
    #[error("empty constituent at offset {0}")]
    EmptyConstituent(usize),
    #[error("unexpected token {token:?} at offset {offset}")]
    UnexpectedToken { token: String, offset: usize },
    #[error("sentence has no tokens")]
    EmptySentence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formalism {
    Dependency,
    Constituency,
}

impl Formalism {
    /// Short tag used in method names and fixture file extensions.
    pub fn short(self) -> &'static str {
        match self {
            Formalism::Dependency => "dt",
            Formalism::Constituency => "ct",
        }
    }

    pub fn file_extension(self) -> &'static str {
        match self {
            Formalism::Dependency => "conllu",
            Formalism::Constituency => "ptb",
        }
    }
}

impl fmt::Display for Formalism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formalism::Dependency => "dependency",
            Formalism::Constituency => "constituency",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub surface: String,
    pub upos: String,
    pub deprel: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxNode {
    pub id: NodeId,
    pub formalism: Formalism,
    /// Dependency relation or constituent tag.
    pub label: String,
    /// Head token (dependency trees only).
    pub head_token: Option<usize>,
    /// Token indices dominated by this node, ascending.
    pub span: Vec<usize>,
    /// Span tokens joined with single spaces.
    pub surface: String,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    /// Set by [`prune`]; skipped nodes stay in the tree but are never processed.
    #[serde(default)]
    pub skipped: bool,
}

impl SyntaxNode {
    pub fn leftmost(&self) -> usize {
        self.span.first().copied().unwrap_or(0)
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxTree {
    pub formalism: Formalism,
    pub question: String,
    pub tokens: Vec<Token>,
    pub root: NodeId,
    /// Indexed by `NodeId`.
    pub nodes: Vec<SyntaxNode>,
}

impl SyntaxTree {
    /// Builds a dependency tree from tokens and their 1-based heads (0 marks
    /// the root). One node per token; the node's span is the closure of its
    /// subtree.
    pub fn from_heads(tokens: Vec<Token>, heads: &[usize]) -> Result<Self, SyntaxError> {
        let n = tokens.len();
        if n == 0 {
            return Err(SyntaxError::EmptySentence);
        }
        assert_eq!(heads.len(), n, "one head per token");
        let roots: Vec<usize> = (0..n).filter(|&i| heads[i] == 0).map(|i| i + 1).collect();
        if roots.len() > 1 {
            return Err(SyntaxError::MultipleRoots(roots));
        }
        for (i, &h) in heads.iter().enumerate() {
            if h > n {
                return Err(SyntaxError::MalformedConllu {
                    line: 0,
                    reason: format!("token {} has head {} outside 0..={}", i + 1, h, n),
                });
            }
        }
        // Walk up from every token; any walk longer than n revisits a token.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while heads[cur] != 0 {
                cur = heads[cur] - 1;
                steps += 1;
                if steps > n {
                    return Err(SyntaxError::CyclicHeads(start + 1));
                }
            }
        }
        let root_token = match roots.first() {
            Some(&r) => r,
            None => return Err(SyntaxError::CyclicHeads(1)),
        };

        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, &h) in heads.iter().enumerate() {
            if h != 0 {
                children[h - 1].push(i);
            }
        }
        let mut spans: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        let order = postorder_indices(root_token - 1, &children);
        for &i in &order {
            let mut span = BTreeSet::from([i + 1]);
            for &c in &children[i] {
                span.extend(spans[c].iter().copied());
            }
            spans[i] = span;
        }

        let nodes = (0..n)
            .map(|i| {
                let span: Vec<usize> = spans[i].iter().copied().collect();
                let mut kids: Vec<NodeId> = children[i].iter().map(|&c| NodeId(c)).collect();
                kids.sort_by_key(|c| spans[c.0].first().copied().unwrap_or(0));
                SyntaxNode {
                    id: NodeId(i),
                    formalism: Formalism::Dependency,
                    label: tokens[i].deprel.clone().unwrap_or_else(|| "dep".into()),
                    head_token: Some(i + 1),
                    surface: render_surface(&tokens, &span),
                    span,
                    children: kids,
                    parent: (heads[i] != 0).then(|| NodeId(heads[i] - 1)),
                    skipped: false,
                }
            })
            .collect();
        let question = tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ");
        Ok(SyntaxTree {
            formalism: Formalism::Dependency,
            question,
            tokens,
            root: NodeId(root_token - 1),
            nodes,
        })
    }

    pub fn node(&self, id: NodeId) -> &SyntaxNode {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nearest unskipped descendants of `id`, i.e. its children once skipped
    /// nodes are spliced out. Ordered by leftmost token.
    pub fn unskipped_children(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.node(id).children.iter().rev().copied().collect();
        while let Some(c) = stack.pop() {
            let node = self.node(c);
            if node.skipped {
                stack.extend(node.children.iter().rev().copied());
            } else {
                out.push(c);
            }
        }
        out.sort_by_key(|c| self.node(*c).leftmost());
        out
    }

    /// Nearest unskipped ancestor; the root counts as unskipped.
    pub fn unskipped_parent(&self, id: NodeId) -> Option<NodeId> {
        let mut cur = self.node(id).parent;
        while let Some(p) = cur {
            if p == self.root || !self.node(p).skipped {
                return Some(p);
            }
            cur = self.node(p).parent;
        }
        None
    }

    /// Every node below `id` (excluding `id`), pre-order.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.node(id).children.iter().rev().copied().collect();
        while let Some(c) = stack.pop() {
            out.push(c);
            stack.extend(self.node(c).children.iter().rev().copied());
        }
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = &SyntaxNode> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

/// Unskipped non-root nodes, each after all of its unskipped descendants.
/// Siblings are visited by ascending leftmost token.
pub fn traversal_order(tree: &SyntaxTree) -> Vec<NodeId> {
    let mut out = Vec::new();
    // (node, children_pushed)
    let mut stack = vec![(tree.root, false)];
    while let Some((id, expanded)) = stack.pop() {
        if expanded {
            if id != tree.root {
                out.push(id);
            }
            continue;
        }
        stack.push((id, true));
        for c in tree.unskipped_children(id).into_iter().rev() {
            stack.push((c, false));
        }
    }
    out
}

pub(crate) fn render_surface(tokens: &[Token], span: &[usize]) -> String {
    span.iter()
        .map(|&i| tokens[i - 1].surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

fn postorder_indices(root: usize, children: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::with_capacity(children.len());
    let mut stack = vec![(root, false)];
    while let Some((i, expanded)) = stack.pop() {
        if expanded {
            out.push(i);
        } else {
            stack.push((i, true));
            for &c in children[i].iter().rev() {
                stack.push((c, false));
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub fn tokens(words: &[&str], deprels: &[&str]) -> Vec<Token> {
        words
            .iter()
            .zip(deprels)
            .enumerate()
            .map(|(i, (w, d))| Token {
                index: i + 1,
                surface: (*w).to_string(),
                upos: "X".into(),
                deprel: Some((*d).to_string()),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::tokens;
    use super::*;

    #[test]
    fn chain_orders_deepest_first() {
        // r <- a <- b <- c
        let toks = tokens(&["r", "a", "b", "c"], &["root", "dep", "dep", "dep"]);
        let tree = SyntaxTree::from_heads(toks, &[0, 1, 2, 3]).unwrap();
        let surfaces: Vec<_> = traversal_order(&tree)
            .iter()
            .map(|id| tree.node(*id).surface.clone())
            .collect();
        assert_eq!(surfaces, ["c", "b c", "a b c"]);
    }

    #[test]
    fn chain_including_root_position() {
        // c is deepest: c -> b -> a(root). Non-root order is [c, b].
        let toks = tokens(&["a", "b", "c"], &["root", "dep", "dep"]);
        let tree = SyntaxTree::from_heads(toks, &[0, 1, 2]).unwrap();
        assert_eq!(traversal_order(&tree), vec![NodeId(2), NodeId(1)]);
    }

    #[test]
    fn siblings_ordered_by_leftmost_token() {
        let toks = tokens(&["x", "r", "y"], &["dep", "root", "dep"]);
        let tree = SyntaxTree::from_heads(toks, &[2, 0, 2]).unwrap();
        assert_eq!(traversal_order(&tree), vec![NodeId(0), NodeId(2)]);
    }

    #[test]
    fn cycles_are_rejected() {
        let toks = tokens(&["a", "b", "c"], &["root", "dep", "dep"]);
        let err = SyntaxTree::from_heads(toks, &[0, 3, 2]).unwrap_err();
        assert!(matches!(err, SyntaxError::CyclicHeads(_)));
    }

    #[test]
    fn unskipped_children_splice_through_skipped_nodes() {
        let toks = tokens(&["a", "b", "c", "d"], &["root", "dep", "dep", "dep"]);
        // a <- b <- {c, d}
        let mut tree = SyntaxTree::from_heads(toks, &[0, 1, 2, 2]).unwrap();
        tree.nodes[1].skipped = true;
        assert_eq!(tree.unskipped_children(NodeId(0)), vec![NodeId(2), NodeId(3)]);
        assert_eq!(tree.unskipped_parent(NodeId(3)), Some(NodeId(0)));
    }
}
