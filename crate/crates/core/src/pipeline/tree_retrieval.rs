use std::collections::HashMap;

use super::render::render_docs;
use super::{EvidenceSet, NodeRecord, Pipeline, Question, RerankRecord, RunTrace, TraceFlag};
use crate::index::{
    candidates_from, merge_results, rerank, IndexError, RelevanceScorer, RerankedDoc, RetrievalResult, ScoredDoc,
};
use crate::llm::TemplateId;
use crate::syntax::{prune, traversal_order, NodeId, SyntaxTree};

impl<'a> Pipeline<'a> {
    /// Tree-Retrieval: no query generation and no per-node answering.
    ///
    /// Every processed node, and the root, searches with its own surface
    /// (`per_node_k` hits). Each node's pool is the union of its own hits and
    /// those of its processed descendants, reranked against the node surface
    /// down to `rerank_m`. The root's reranked passages are the documents of
    /// the single final-answer call.
    pub fn run_tree_retrieval(
        &self,
        question: &Question<'_>,
        tree: &SyntaxTree,
        scorer: &dyn RelevanceScorer,
    ) -> RunTrace {
        let mut trace = RunTrace::new(question, super::Method::TreeRetrieval(tree.formalism));
        let tree = prune(tree, &self.config.prune_policy(tree.formalism));
        let mut order = traversal_order(&tree);
        order.push(tree.root);
        let cfg = self.config.tree_retrieval;

        let mut hits: HashMap<NodeId, RetrievalResult> = HashMap::new();
        let mut records: Vec<NodeRecord> = Vec::new();
        for &id in &order {
            let node = tree.node(id);
            let mut record = NodeRecord::new(node, tree.unskipped_children(id));
            match self.retriever.search(&node.surface, cfg.per_node_k) {
                Ok(r) => {
                    trace.search_calls += 1;
                    record.retrievals.push(r.clone());
                    hits.insert(id, r);
                }
                Err(IndexError::EmptyQuery) => record.flags.push(TraceFlag::EmptyQuery {
                    query: node.surface.clone(),
                }),
                Err(e) => {
                    trace.fatal_error = Some(format!("retrieval: {e}"));
                    return trace;
                }
            }

            let subtree = std::iter::once(id).chain(tree.descendants(id));
            let pool = merge_results(subtree.filter_map(|n| hits.get(&n)));
            let candidates = candidates_from(&pool, |doc_id| self.retriever.paragraph(doc_id));
            let selected = match rerank(&candidates, &node.surface, scorer, cfg.rerank_m) {
                Ok(s) => s,
                Err(e) => {
                    trace.fatal_error = Some(format!("rerank: {e}"));
                    return trace;
                }
            };
            record.evidence = Some(EvidenceSet {
                node_id: id,
                text: render_docs(self.retriever, &as_scored(&selected), self.config.doc_char_budget),
                supporting_doc_ids: selected.iter().map(|d| d.doc_id.clone()).collect(),
                source_queries: vec![node.surface.clone()],
            });
            record.rerank = Some(RerankRecord { pool, selected });
            records.push(record);
        }

        let root = records.pop().expect("root is always in the order");
        trace.node_records = records;
        let passages = root.rerank.as_ref().map(|r| as_scored(&r.selected)).unwrap_or_default();
        let documents = render_docs(self.retriever, &passages, self.config.doc_char_budget);
        trace.root_record = Some(root);
        self.finish_direct(&mut trace, TemplateId::FagMultihop, documents);
        trace
    }
}

fn as_scored(docs: &[RerankedDoc]) -> Vec<ScoredDoc> {
    docs.iter()
        .map(|d| ScoredDoc {
            doc_id: d.doc_id.clone(),
            score: d.rerank_score,
        })
        .collect()
}
