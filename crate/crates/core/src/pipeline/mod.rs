//! End-to-end orchestration: per-node query generation, retrieval and
//! subcomponent answering in bottom-up order, then one final synthesis call.
//!
//! Also hosts the Tree-Retrieval variant (sub-phrase retrieval with
//! reranking, a single LLM call) and the module ablations.

mod queries;
mod render;
mod run;
mod tree_retrieval;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{RelevanceScorer, Retriever, RerankedDoc, RetrievalResult, ScoredDoc};
use crate::llm::{Gateway, LedgerEntry, ParsedFinal, TemplateId};
use crate::syntax::{Formalism, LeafMode, NodeId, PrunePolicy, SyntaxTree};

pub use queries::{normalize_query, parse_query_response, select_queries};
pub use render::{render_doc, render_evidence};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("method {0} needs a syntax tree")]
    MissingTree(Method),
    #[error("tree is {found} but the method expects {expected}")]
    FormalismMismatch { expected: Formalism, found: Formalism },
    #[error("method {0} needs a relevance scorer")]
    MissingScorer(Method),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaStyle {
    /// Short factoid answers (HotpotQA, MuSiQue, 2WikiMQA).
    #[default]
    Multihop,
    /// Long-form answers covering every reading (AmbigDoc, ASQA).
    Ambiguous,
}

impl QaStyle {
    pub fn qg_template(self) -> TemplateId {
        match self {
            QaStyle::Multihop => TemplateId::QgMultihop,
            QaStyle::Ambiguous => TemplateId::QgAmbiguous,
        }
    }

    pub fn fag_template(self) -> TemplateId {
        match self {
            QaStyle::Multihop => TemplateId::FagMultihop,
            QaStyle::Ambiguous => TemplateId::FagAmbiguous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeRetrievalConfig {
    pub per_node_k: usize,
    pub rerank_m: usize,
}

impl Default for TreeRetrievalConfig {
    fn default() -> Self {
        TreeRetrievalConfig {
            per_node_k: 10,
            rerank_m: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub formalism: Formalism,
    /// L_min: nodes spanning fewer tokens are not processed.
    pub min_phrase_tokens: usize,
    /// Overrides the formalism's default function-word labels.
    pub skip_labels: Option<BTreeSet<String>>,
    pub candidates_per_node: usize,
    pub selected_per_node: usize,
    /// BM25 hits per selected query.
    pub docs_per_query: usize,
    /// Cap on a node's merged document set.
    pub merged_pool_cap: usize,
    pub tree_retrieval: TreeRetrievalConfig,
    pub leaf_mode: LeafMode,
    pub qa_style: QaStyle,
    /// Characters of paragraph text kept per document in a prompt.
    pub doc_char_budget: usize,
    /// Rendered prompts longer than this are cut at the tail and flagged.
    pub prompt_char_ceiling: usize,
    /// Nodes processed concurrently within one question.
    pub node_parallelism: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            formalism: Formalism::Dependency,
            min_phrase_tokens: 3,
            skip_labels: None,
            candidates_per_node: 5,
            selected_per_node: 3,
            docs_per_query: 15,
            merged_pool_cap: 45,
            tree_retrieval: TreeRetrievalConfig::default(),
            leaf_mode: LeafMode::Query,
            qa_style: QaStyle::Multihop,
            doc_char_budget: 1200,
            prompt_char_ceiling: 60_000,
            node_parallelism: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.selected_per_node == 0 || self.selected_per_node > self.candidates_per_node {
            return bad("need 1 <= selected_per_node <= candidates_per_node");
        }
        if self.docs_per_query == 0 || self.merged_pool_cap == 0 {
            return bad("docs_per_query and merged_pool_cap must be >= 1");
        }
        if self.tree_retrieval.per_node_k == 0 || self.tree_retrieval.rerank_m == 0 {
            return bad("tree_retrieval.per_node_k and rerank_m must be >= 1");
        }
        if self.min_phrase_tokens == 0 {
            return bad("min_phrase_tokens must be >= 1");
        }
        if self.node_parallelism == 0 {
            return bad("node_parallelism must be >= 1");
        }
        if self.prompt_char_ceiling < 1000 {
            return bad("prompt_char_ceiling must be >= 1000");
        }
        Ok(())
    }

    /// Pruning for a tree of `formalism`; custom skip labels apply to either.
    pub fn prune_policy(&self, formalism: Formalism) -> PrunePolicy {
        let mut policy = PrunePolicy::for_formalism(formalism, self.min_phrase_tokens);
        if let Some(labels) = &self.skip_labels {
            policy.skip_labels = labels.clone();
        }
        policy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ablation {
    NoQg,
    NoSag,
    NoIr,
    IrOnly,
    QgOnly,
    CotOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::NoQg,
        Ablation::NoSag,
        Ablation::NoIr,
        Ablation::IrOnly,
        Ablation::QgOnly,
        Ablation::CotOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoQg => "no-qg",
            Ablation::NoSag => "no-sag",
            Ablation::NoIr => "no-ir",
            Ablation::IrOnly => "ir-only",
            Ablation::QgOnly => "qg-only",
            Ablation::CotOnly => "cot-only",
        }
    }

    /// Whether the mode walks the syntax tree at all.
    pub fn uses_tree(self) -> bool {
        !matches!(self, Ablation::IrOnly | Ablation::CotOnly)
    }
}

/// A run configuration as named in traces and on the command line:
/// `treerare-dt`, `tree-retrieval-ct`, `ablation:no-sag`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TreeRare(Formalism),
    TreeRetrieval(Formalism),
    Ablation(Ablation),
}

impl Method {
    /// Formalism of the tree the method consumes, if it uses one. Ablations
    /// follow the configured formalism.
    pub fn formalism(self) -> Option<Formalism> {
        match self {
            Method::TreeRare(f) | Method::TreeRetrieval(f) => Some(f),
            Method::Ablation(_) => None,
        }
    }

    pub fn uses_tree(self) -> bool {
        match self {
            Method::Ablation(a) => a.uses_tree(),
            _ => true,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TreeRare(fm) => write!(f, "treerare-{}", fm.short()),
            Method::TreeRetrieval(fm) => write!(f, "tree-retrieval-{}", fm.short()),
            Method::Ablation(a) => write!(f, "ablation:{}", a.as_str()),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let formalism = |tag: &str| match tag {
            "dt" => Some(Formalism::Dependency),
            "ct" => Some(Formalism::Constituency),
            _ => None,
        };
        let parsed = if let Some(rest) = s.strip_prefix("treerare-") {
            formalism(rest).map(Method::TreeRare)
        } else if let Some(rest) = s.strip_prefix("tree-retrieval-") {
            formalism(rest).map(Method::TreeRetrieval)
        } else if let Some(rest) = s.strip_prefix("ablation:") {
            Ablation::ALL.into_iter().find(|a| a.as_str() == rest).map(Method::Ablation)
        } else {
            None
        };
        parsed.ok_or_else(|| format!("unknown method {s:?}"))
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Q_n: queries generated for one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySet {
    pub node_id: NodeId,
    pub candidates: Vec<String>,
    pub selected: Vec<String>,
}

/// E_n: what a node contributes upward and to the final synthesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub node_id: NodeId,
    pub text: String,
    pub supporting_doc_ids: Vec<String>,
    pub source_queries: Vec<String>,
}

/// Conditions worth knowing about that did not stop the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum TraceFlag {
    /// The final completion had no usable `FINAL:` marker.
    FormatViolation,
    /// QG output had no parseable queries; the node surface was used instead.
    EmptyQueryList,
    /// A query had no indexable tokens and was not searched.
    EmptyQuery { query: String },
    /// A prompt exceeded the character ceiling and was cut at the tail.
    PromptTruncated { template: TemplateId },
    /// The node had no processed children and used its own text as evidence.
    LeafEvidence,
    /// A child failed, so its evidence is missing from this node's context.
    MissingChildEvidence { child: NodeId },
    /// Token counts were estimated, not reported by the provider.
    EstimatedUsage,
}

/// Tree-Retrieval bookkeeping for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankRecord {
    /// Union of this node's and its processed descendants' hits.
    pub pool: Vec<ScoredDoc>,
    pub selected: Vec<RerankedDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: NodeId,
    pub label: String,
    pub surface: String,
    /// Processed children, i.e. whose evidence feeds this node.
    pub children: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queries: Option<QuerySet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrievals: Vec<RetrievalResult>,
    /// D_n after merging and capping.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged: Vec<ScoredDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rerank: Option<RerankRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<EvidenceSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<TraceFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl NodeRecord {
    fn new(node: &crate::syntax::SyntaxNode, children: Vec<NodeId>) -> Self {
        NodeRecord {
            node_id: node.id,
            label: node.label.clone(),
            surface: node.surface.clone(),
            children,
            queries: None,
            retrievals: Vec::new(),
            merged: Vec::new(),
            rerank: None,
            evidence: None,
            flags: Vec::new(),
            error: None,
        }
    }
}

/// Everything one question's run produced. One JSON line per trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub trace_schema: u32,
    pub question_id: String,
    #[serde(default)]
    pub dataset: String,
    pub method: Method,
    pub question: String,
    /// In traversal order.
    pub node_records: Vec<NodeRecord>,
    /// Tree-Retrieval only: the root's pool and reranked passages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_record: Option<NodeRecord>,
    /// ir-only: the single flat retrieval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_retrieval: Option<RetrievalResult>,
    pub final_answer: Option<String>,
    /// Raw text of the final completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatal_error: Option<String>,
    pub search_calls: u32,
    pub usage: Vec<LedgerEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<TraceFlag>,
}

impl RunTrace {
    pub fn new(question: &Question<'_>, method: Method) -> Self {
        RunTrace {
            trace_schema: TRACE_SCHEMA,
            question_id: question.id.to_string(),
            dataset: String::new(),
            method,
            question: question.text.to_string(),
            node_records: Vec::new(),
            root_record: None,
            direct_retrieval: None,
            final_answer: None,
            final_completion: None,
            fatal_error: None,
            search_calls: 0,
            usage: Vec::new(),
            flags: Vec::new(),
        }
    }

    /// Number of LLM calls recorded.
    pub fn llm_calls(&self) -> usize {
        self.usage.len()
    }

    fn finish(&mut self, result: Result<ParsedFinal, String>, completion: Option<String>) {
        match result {
            Ok(parsed) => {
                if parsed.format_violation {
                    self.flags.push(TraceFlag::FormatViolation);
                }
                self.final_answer = Some(parsed.answer);
            }
            Err(e) => self.fatal_error = Some(e),
        }
        self.final_completion = completion;
        if self.usage.iter().any(|u| u.usage.estimated) && !self.flags.contains(&TraceFlag::EstimatedUsage) {
            self.flags.push(TraceFlag::EstimatedUsage);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Question<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

/// Shared, read-only run context: configuration, retriever and model gateway.
/// One `Pipeline` can serve many questions concurrently.
pub struct Pipeline<'a> {
    config: &'a PipelineConfig,
    retriever: &'a dyn Retriever,
    gateway: &'a Gateway,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: &'a PipelineConfig,
        retriever: &'a dyn Retriever,
        gateway: &'a Gateway,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Pipeline {
            config,
            retriever,
            gateway,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        self.config
    }

    /// Runs `method` on one question. Tree methods need `tree` in the
    /// method's formalism; ablations accept either formalism.
    pub fn run(
        &self,
        method: Method,
        question: &Question<'_>,
        tree: Option<&SyntaxTree>,
        scorer: Option<&dyn RelevanceScorer>,
    ) -> Result<RunTrace, PipelineError> {
        if let (Some(expected), Some(t)) = (method.formalism(), tree) {
            if t.formalism != expected {
                return Err(PipelineError::FormalismMismatch {
                    expected,
                    found: t.formalism,
                });
            }
        }
        match method {
            Method::TreeRare(_) => Ok(self.run_treerare(question, tree.ok_or(PipelineError::MissingTree(method))?)),
            Method::TreeRetrieval(_) => {
                let tree = tree.ok_or(PipelineError::MissingTree(method))?;
                let scorer = scorer.ok_or(PipelineError::MissingScorer(method))?;
                Ok(self.run_tree_retrieval(question, tree, scorer))
            }
            Method::Ablation(mode) => self.run_ablation(question, mode, tree),
        }
    }
}
