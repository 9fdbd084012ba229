use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Formalism, SyntaxTree};

/// Which nodes are too small or too uninformative to get their own
/// retrieval round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunePolicy {
    /// Nodes whose span has fewer tokens than this are skipped.
    pub min_phrase_tokens: usize,
    /// Labels treated as function words. `det` also matches `det:predet`.
    pub skip_labels: BTreeSet<String>,
}

const DEPENDENCY_SKIP: &[&str] = &["punct", "det", "cc", "case", "mark"];
const CONSTITUENCY_SKIP: &[&str] = &[
    "DT", "CC", ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "HYPH", "NFP",
];

impl PrunePolicy {
    pub fn for_formalism(formalism: Formalism, min_phrase_tokens: usize) -> Self {
        let labels = match formalism {
            Formalism::Dependency => DEPENDENCY_SKIP,
            Formalism::Constituency => CONSTITUENCY_SKIP,
        };
        PrunePolicy {
            min_phrase_tokens,
            skip_labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// No pruning at all.
    pub fn keep_all() -> Self {
        PrunePolicy {
            min_phrase_tokens: 1,
            skip_labels: BTreeSet::new(),
        }
    }

    fn skips_label(&self, label: &str) -> bool {
        if self.skip_labels.contains(label) {
            return true;
        }
        match label.split_once(':') {
            Some((base, _)) => self.skip_labels.contains(base),
            None => false,
        }
    }
}

/// What a processed node with no processed children does.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafMode {
    /// Generate queries from the sub-phrase like any other node.
    #[default]
    Query,
    /// Use the sub-phrase text itself as the node's evidence.
    Evidence,
}

/// Marks nodes as skipped. The root is never skipped; it is excluded from the
/// processing order anyway because final synthesis covers the whole question.
pub fn prune(tree: &SyntaxTree, policy: &PrunePolicy) -> SyntaxTree {
    let min = policy.min_phrase_tokens.max(1);
    let mut out = tree.clone();
    for node in &mut out.nodes {
        node.skipped = node.id != tree.root
            && (node.span.len() < min || policy.skips_label(&node.label));
    }
    out
}
