use std::collections::{BTreeMap, HashMap};

use super::queries::{parse_query_response, select_queries};
use super::render::{fit_prompt, render_docs, render_evidence};
use super::{
    Ablation, EvidenceSet, Method, NodeRecord, Pipeline, PipelineError, QuerySet, Question, RunTrace,
    TraceFlag,
};
use crate::index::{merge_results, IndexError, RetrievalResult, ScoredDoc};
use crate::llm::{parse_final, LedgerEntry, LlmError, ParsedFinal, Stage, TemplateId};
use crate::syntax::{prune, traversal_order, LeafMode, NodeId, SyntaxNode, SyntaxTree};

/// Which per-node modules are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeMode {
    Full,
    NoQg,
    NoSag,
    NoIr,
    QgOnly,
}

impl NodeMode {
    fn retrieves(self) -> bool {
        matches!(self, NodeMode::Full | NodeMode::NoQg | NodeMode::NoSag)
    }
}

struct NodeOutcome {
    record: NodeRecord,
    ledger: Vec<LedgerEntry>,
    searches: u32,
}

/// Output of the final synthesis call.
pub(crate) struct FinalAnswer {
    pub parsed: ParsedFinal,
    pub completion: String,
}

impl<'a> Pipeline<'a> {
    /// Q_n: asks the model for sub-queries about `node`, given the question
    /// and the evidence of the node's processed children (`(surface, E_c)`
    /// pairs in traversal order), then keeps the best few.
    ///
    /// If nothing parseable comes back the node surface becomes the only
    /// query and [`TraceFlag::EmptyQueryList`] is raised.
    pub fn generate_queries(
        &self,
        question: &str,
        node: &SyntaxNode,
        child_evidence: &[(&str, &EvidenceSet)],
        ledger: &mut Vec<LedgerEntry>,
        flags: &mut Vec<TraceFlag>,
    ) -> Result<QuerySet, LlmError> {
        let template = self.config.qa_style.qg_template();
        let context = render_evidence(child_evidence.iter().map(|(s, e)| (*s, e.text.as_str())));
        let bindings = BTreeMap::from([
            ("question", question.to_string()),
            ("phrase", node.surface.clone()),
            ("context", context),
        ]);
        let prompt = self.prompt(template, bindings, "context", flags)?;
        let completion = self
            .gateway
            .call(Stage::Qg, Some(node.id), template, &prompt, &node.surface, ledger)?;
        let mut candidates = parse_query_response(&completion.text, self.config.candidates_per_node);
        let mut selected = select_queries(&candidates, self.config.selected_per_node);
        if selected.is_empty() {
            flags.push(TraceFlag::EmptyQueryList);
            candidates = vec![node.surface.clone()];
            selected = candidates.clone();
        }
        Ok(QuerySet {
            node_id: node.id,
            candidates,
            selected,
        })
    }

    /// E_n: answers the node's selected queries from its documents.
    /// `docs` may be empty (the no-IR ablation); the document section of the
    /// prompt is then blank.
    pub fn answer_subcomponent(
        &self,
        node: &SyntaxNode,
        queries: &QuerySet,
        docs: &[ScoredDoc],
        ledger: &mut Vec<LedgerEntry>,
        flags: &mut Vec<TraceFlag>,
    ) -> Result<EvidenceSet, LlmError> {
        let template = TemplateId::Sag;
        let bindings = BTreeMap::from([
            ("question", queries.selected.join("; ")),
            ("context", render_docs(self.retriever, docs, self.config.doc_char_budget)),
        ]);
        let prompt = self.prompt(template, bindings, "context", flags)?;
        let completion = self
            .gateway
            .call(Stage::Sag, Some(node.id), template, &prompt, &node.surface, ledger)?;
        let text = completion.text.trim();
        if text.is_empty() {
            return Err(LlmError::BadResponse("empty subcomponent answer".into()));
        }
        Ok(EvidenceSet {
            node_id: node.id,
            text: text.to_string(),
            supporting_doc_ids: docs
                .iter()
                .filter(|d| self.retriever.paragraph(&d.doc_id).is_some())
                .map(|d| d.doc_id.clone())
                .collect(),
            source_queries: queries.selected.clone(),
        })
    }

    /// A: the final answer from the question and every node's evidence, given
    /// as `(surface, E_n)` pairs in traversal order.
    pub fn synthesize_answer(
        &self,
        question: &str,
        evidence: &[(&str, &EvidenceSet)],
        ledger: &mut Vec<LedgerEntry>,
        flags: &mut Vec<TraceFlag>,
    ) -> Result<(ParsedFinal, String), LlmError> {
        let documents = render_evidence(evidence.iter().map(|(s, e)| (*s, e.text.as_str())));
        let template = self.config.qa_style.fag_template();
        let done = self.final_call(template, question, documents, ledger, flags)?;
        Ok((done.parsed, done.completion))
    }

    pub(crate) fn final_call(
        &self,
        template: TemplateId,
        question: &str,
        documents: String,
        ledger: &mut Vec<LedgerEntry>,
        flags: &mut Vec<TraceFlag>,
    ) -> Result<FinalAnswer, LlmError> {
        let bindings = BTreeMap::from([("question", question.to_string()), ("documents", documents)]);
        let prompt = self.prompt(template, bindings, "documents", flags)?;
        let completion = self.gateway.call(Stage::Fag, None, template, &prompt, question, ledger)?;
        Ok(FinalAnswer {
            parsed: parse_final(&completion.text),
            completion: completion.text,
        })
    }

    fn prompt(
        &self,
        template: TemplateId,
        bindings: BTreeMap<&str, String>,
        shrink: &str,
        flags: &mut Vec<TraceFlag>,
    ) -> Result<String, LlmError> {
        let (prompt, cut) = fit_prompt(template, bindings, shrink, self.config.prompt_char_ceiling)?;
        if cut {
            flags.push(TraceFlag::PromptTruncated { template });
        }
        Ok(prompt)
    }

    /// Full TreeRare: every processed node goes through QG, retrieval and
    /// SAG, children before parents; then one FAG call over all evidence.
    pub fn run_treerare(&self, question: &Question<'_>, tree: &SyntaxTree) -> RunTrace {
        self.run_tree_modes(question, tree, Method::TreeRare(tree.formalism), NodeMode::Full)
    }

    /// Runs one ablation. `tree` is required unless the mode ignores syntax
    /// (`ir-only`, `cot-only`).
    pub fn run_ablation(
        &self,
        question: &Question<'_>,
        mode: Ablation,
        tree: Option<&SyntaxTree>,
    ) -> Result<RunTrace, PipelineError> {
        let method = Method::Ablation(mode);
        let node_mode = match mode {
            Ablation::NoQg => NodeMode::NoQg,
            Ablation::NoSag => NodeMode::NoSag,
            Ablation::NoIr => NodeMode::NoIr,
            Ablation::QgOnly => NodeMode::QgOnly,
            Ablation::IrOnly => return Ok(self.run_ir_only(question)),
            Ablation::CotOnly => return Ok(self.run_cot_only(question)),
        };
        let tree = tree.ok_or(PipelineError::MissingTree(method))?;
        Ok(self.run_tree_modes(question, tree, method, node_mode))
    }

    fn run_ir_only(&self, question: &Question<'_>) -> RunTrace {
        let mut trace = RunTrace::new(question, Method::Ablation(Ablation::IrOnly));
        let hits = match self.retriever.search(question.text, self.config.docs_per_query) {
            Ok(r) => {
                trace.search_calls += 1;
                r
            }
            Err(IndexError::EmptyQuery) => {
                trace.flags.push(TraceFlag::EmptyQuery {
                    query: question.text.to_string(),
                });
                RetrievalResult {
                    query: question.text.to_string(),
                    hits: Vec::new(),
                }
            }
            Err(e) => {
                trace.fatal_error = Some(e.to_string());
                return trace;
            }
        };
        let documents = render_docs(self.retriever, &hits.hits, self.config.doc_char_budget);
        trace.direct_retrieval = Some(hits);
        self.finish_direct(&mut trace, self.config.qa_style.fag_template(), documents);
        trace
    }

    fn run_cot_only(&self, question: &Question<'_>) -> RunTrace {
        let mut trace = RunTrace::new(question, Method::Ablation(Ablation::CotOnly));
        self.finish_direct(&mut trace, self.config.qa_style.fag_template(), String::new());
        trace
    }

    pub(crate) fn finish_direct(&self, trace: &mut RunTrace, template: TemplateId, documents: String) {
        let mut usage = Vec::new();
        let mut flags = Vec::new();
        let question = trace.question.clone();
        let result = self.final_call(template, &question, documents, &mut usage, &mut flags);
        trace.usage.extend(usage);
        trace.flags.extend(flags);
        match result {
            Ok(done) => trace.finish(Ok(done.parsed), Some(done.completion)),
            Err(e) => trace.finish(Err(format!("final answer: {e}")), None),
        }
    }

    fn run_tree_modes(&self, question: &Question<'_>, tree: &SyntaxTree, method: Method, mode: NodeMode) -> RunTrace {
        let mut trace = RunTrace::new(question, method);
        let tree = prune(tree, &self.config.prune_policy(tree.formalism));
        let order = traversal_order(&tree);
        let mut done = self.process_nodes(question.text, &tree, &order, mode);

        for id in &order {
            let outcome = done.remove(id).expect("every scheduled node has an outcome");
            trace.search_calls += outcome.searches;
            trace.usage.extend(outcome.ledger);
            trace.node_records.push(outcome.record);
        }
        let evidence: Vec<(&str, &EvidenceSet)> = trace
            .node_records
            .iter()
            .filter_map(|r| r.evidence.as_ref().map(|e| (r.surface.as_str(), e)))
            .collect();
        let mut usage = Vec::new();
        let mut flags = Vec::new();
        let result = self.synthesize_answer(question.text, &evidence, &mut usage, &mut flags);
        trace.usage.extend(usage);
        trace.flags.extend(flags);
        match result {
            Ok((parsed, completion)) => trace.finish(Ok(parsed), Some(completion)),
            Err(e) => trace.finish(Err(format!("final answer: {e}")), None),
        }
        trace
    }

    /// Dependency-ordered scheduling. A node's level is one more than the
    /// highest level among its processed children, so nodes sharing a level
    /// never stand in an ancestor relation and may run concurrently.
    fn process_nodes(
        &self,
        question: &str,
        tree: &SyntaxTree,
        order: &[NodeId],
        mode: NodeMode,
    ) -> HashMap<NodeId, NodeOutcome> {
        let mut level: HashMap<NodeId, usize> = HashMap::new();
        let mut waves: Vec<Vec<NodeId>> = Vec::new();
        for &id in order {
            let l = tree
                .unskipped_children(id)
                .iter()
                .map(|c| level[c] + 1)
                .max()
                .unwrap_or(0);
            level.insert(id, l);
            if waves.len() <= l {
                waves.resize(l + 1, Vec::new());
            }
            waves[l].push(id);
        }

        let mut done: HashMap<NodeId, NodeOutcome> = HashMap::new();
        let workers = self.config.node_parallelism;
        for wave in waves {
            let outcomes: Vec<NodeOutcome> = if workers <= 1 || wave.len() <= 1 {
                wave.iter()
                    .map(|&id| self.process_node(question, tree, id, mode, &done))
                    .collect()
            } else {
                let chunk = wave.len().div_ceil(workers);
                let done_ref = &done;
                std::thread::scope(|s| {
                    let handles: Vec<_> = wave
                        .chunks(chunk)
                        .map(|ids| {
                            s.spawn(move || {
                                ids.iter()
                                    .map(|&id| self.process_node(question, tree, id, mode, done_ref))
                                    .collect::<Vec<_>>()
                            })
                        })
                        .collect();
                    handles
                        .into_iter()
                        .flat_map(|h| h.join().expect("node worker panicked"))
                        .collect()
                })
            };
            for o in outcomes {
                done.insert(o.record.node_id, o);
            }
        }
        done
    }

    fn process_node(
        &self,
        question: &str,
        tree: &SyntaxTree,
        id: NodeId,
        mode: NodeMode,
        done: &HashMap<NodeId, NodeOutcome>,
    ) -> NodeOutcome {
        let node = tree.node(id);
        let children = tree.unskipped_children(id);
        let mut out = NodeOutcome {
            record: NodeRecord::new(node, children.clone()),
            ledger: Vec::new(),
            searches: 0,
        };
        let mut child_evidence = Vec::new();
        for c in &children {
            let rec = &done[c].record;
            match &rec.evidence {
                Some(e) => child_evidence.push((rec.surface.as_str(), e)),
                None => out.record.flags.push(TraceFlag::MissingChildEvidence { child: *c }),
            }
        }

        if self.config.leaf_mode == LeafMode::Evidence && children.is_empty() {
            out.record.flags.push(TraceFlag::LeafEvidence);
            out.record.evidence = Some(EvidenceSet {
                node_id: id,
                text: node.surface.clone(),
                supporting_doc_ids: Vec::new(),
                source_queries: Vec::new(),
            });
            return out;
        }

        if let Err(e) = self.node_steps(question, node, mode, &child_evidence, &mut out) {
            out.record.error = Some(e);
        }
        out
    }

    fn node_steps(
        &self,
        question: &str,
        node: &SyntaxNode,
        mode: NodeMode,
        child_evidence: &[(&str, &EvidenceSet)],
        out: &mut NodeOutcome,
    ) -> Result<(), String> {
        let rec = &mut out.record;
        let queries = match mode {
            NodeMode::NoQg => QuerySet {
                node_id: node.id,
                candidates: vec![node.surface.clone()],
                selected: vec![node.surface.clone()],
            },
            _ => self
                .generate_queries(question, node, child_evidence, &mut out.ledger, &mut rec.flags)
                .map_err(|e| format!("query generation: {e}"))?,
        };
        rec.queries = Some(queries.clone());

        if mode.retrieves() {
            for q in &queries.selected {
                match self.retriever.search(q, self.config.docs_per_query) {
                    Ok(r) => {
                        out.searches += 1;
                        rec.retrievals.push(r);
                    }
                    Err(IndexError::EmptyQuery) => rec.flags.push(TraceFlag::EmptyQuery { query: q.clone() }),
                    Err(e) => return Err(format!("retrieval: {e}")),
                }
            }
            let mut merged = merge_results(&rec.retrievals);
            merged.truncate(self.config.merged_pool_cap);
            rec.merged = merged;
        }

        let evidence = match mode {
            NodeMode::Full | NodeMode::NoQg | NodeMode::NoIr => self
                .answer_subcomponent(node, &queries, &rec.merged, &mut out.ledger, &mut rec.flags)
                .map_err(|e| format!("subcomponent answer: {e}"))?,
            NodeMode::NoSag => {
                let docs: Vec<_> = rec
                    .merged
                    .iter()
                    .filter_map(|d| self.retriever.paragraph(&d.doc_id))
                    .collect();
                if docs.is_empty() {
                    return Err("no documents retrieved".into());
                }
                EvidenceSet {
                    node_id: node.id,
                    text: docs.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n"),
                    supporting_doc_ids: docs.iter().map(|p| p.doc_id.clone()).collect(),
                    source_queries: queries.selected.clone(),
                }
            }
            NodeMode::QgOnly => EvidenceSet {
                node_id: node.id,
                text: queries.selected.join("; "),
                supporting_doc_ids: Vec::new(),
                source_queries: queries.selected.clone(),
            },
        };
        rec.evidence = Some(evidence);
        Ok(())
    }
}
