mod support;

use std::collections::HashSet;

use support::{disjoint_fixture, scripted, Fixture, DISJOINT_Q};
use treerare::eval::cover_em;
use treerare::index::{NegatedScorer, PassthroughScorer, Retriever};
use treerare::llm::Stage;
use treerare::pipeline::{Ablation, Method, Pipeline, PipelineConfig, Question, RunTrace, TraceFlag};
use treerare::syntax::{parse_conllu, Formalism, LeafMode};

fn question(f: &Fixture, i: usize) -> Question<'_> {
    Question {
        id: &f.questions[i].id,
        text: &f.questions[i].question,
    }
}

#[test]
fn evolution_replay() {
    let f = Fixture::load("evolution");
    let gw = f.gateway();
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let q = question(&f, 0);
    let trace = p.run_treerare(&q, &f.trees[q.id]);

    let surfaces: Vec<&str> = trace.node_records.iter().map(|r| r.surface.as_str()).collect();
    assert_eq!(
        surfaces,
        [
            "credits for 'Evolution'",
            "screenwriter with credits for 'Evolution'",
            "Nicolas Cage and Téa Leoni",
            "starring Nicolas Cage and Téa Leoni",
            "film starring Nicolas Cage and Téa Leoni",
        ]
    );
    let answer = trace.final_answer.as_deref().unwrap();
    assert!(answer.contains("David Diamond and David Weissman"));
    assert_eq!(cover_em(answer, &f.questions[0].answers), 1.0);
    assert_eq!(trace.llm_calls(), 2 * 5 + 1);
    assert!(trace.node_records.iter().all(|r| r.error.is_none()));
    // the node with five generated questions keeps three
    let qs = trace.node_records[3].queries.as_ref().unwrap();
    assert_eq!((qs.candidates.len(), qs.selected.len()), (5, 3));
}

#[test]
fn children_resolved_before_parents_and_provenance() {
    let f = Fixture::load("evolution");
    let gw = f.gateway();
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let q = question(&f, 0);
    let trace = p.run_treerare(&q, &f.trees[q.id]);

    let mut seen = HashSet::new();
    for r in &trace.node_records {
        for c in &r.children {
            assert!(seen.contains(c), "child {c} of {} not yet resolved", r.node_id);
        }
        seen.insert(r.node_id);
        let merged: HashSet<&str> = r.merged.iter().map(|d| d.doc_id.as_str()).collect();
        let ev = r.evidence.as_ref().unwrap();
        assert!(!ev.text.is_empty());
        assert!(ev.supporting_doc_ids.iter().all(|d| merged.contains(d.as_str())));
        assert!(r.merged.len() <= cfg.merged_pool_cap);
    }
    // the ledger lists QG then SAG for each node in order, FAG last
    let stages: Vec<Stage> = trace.usage.iter().map(|u| u.stage).collect();
    assert_eq!(stages.last(), Some(&Stage::Fag));
    assert!(stages[..10].chunks(2).all(|c| c == [Stage::Qg, Stage::Sag]));
}

#[test]
fn node_parallelism_does_not_change_the_trace() {
    let f = Fixture::load("evolution");
    let gw = f.gateway();
    let q = question(&f, 0);
    let serial = PipelineConfig::default();
    let parallel = PipelineConfig {
        node_parallelism: 4,
        ..PipelineConfig::default()
    };
    let a = Pipeline::new(&serial, &f.index, &gw).unwrap().run_treerare(&q, &f.trees[q.id]);
    let b = Pipeline::new(&parallel, &f.index, &gw).unwrap().run_treerare(&q, &f.trees[q.id]);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

fn run_toy(cfg: &PipelineConfig, f: &Fixture) -> Vec<RunTrace> {
    let gw = f.gateway();
    let p = Pipeline::new(cfg, &f.index, &gw).unwrap();
    (0..f.questions.len())
        .map(|i| {
            let q = question(f, i);
            p.run_treerare(&q, &f.trees[q.id])
        })
        .collect()
}

#[test]
fn toy_benchmark_end_to_end() {
    let f = Fixture::load("toy");
    let cfg = PipelineConfig::default();
    let traces = run_toy(&cfg, &f);
    let correct: f64 = traces
        .iter()
        .zip(&f.questions)
        .map(|(t, q)| cover_em(t.final_answer.as_deref().unwrap_or(""), &q.answers))
        .sum();
    assert_eq!(correct, 10.0);
    for t in &traces {
        assert_eq!(t.node_records.len(), 2);
        assert_eq!(t.llm_calls(), 2 * t.node_records.len() + 1);
        assert!(t.node_records.iter().all(|r| !r.retrievals.is_empty()));
    }
    let again = run_toy(&cfg, &f);
    let a: Vec<String> = traces.iter().map(|t| serde_json::to_string(t).unwrap()).collect();
    let b: Vec<String> = again.iter().map(|t| serde_json::to_string(t).unwrap()).collect();
    assert_eq!(a, b);
}

#[test]
fn trace_round_trips_through_json() {
    let f = Fixture::load("toy");
    let trace = &run_toy(&PipelineConfig::default(), &f)[0];
    let line = serde_json::to_string(trace).unwrap();
    assert!(line.starts_with("{\"trace_schema\":1,"));
    let back: RunTrace = serde_json::from_str(&line).unwrap();
    assert_eq!(&back, trace);
}

#[test]
fn tree_pruned_to_nothing_is_direct_qa() {
    let conllu = "# text = The cat ?\n1\tThe\t_\tDET\t_\t_\t2\tdet\t_\t_\n2\tcat\t_\tNOUN\t_\t_\t0\troot\t_\t_\n3\t?\t_\tPUNCT\t_\t_\t2\tpunct\t_\t_\n";
    let tree = parse_conllu(conllu).unwrap();
    let f = Fixture::load("toy");
    let gw = scripted(&[("fag_multihop::The cat?", "FINAL: a cat")]);
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let t = p.run_treerare(&Question { id: "x", text: "The cat?" }, &tree);
    assert!(t.node_records.is_empty());
    assert_eq!(t.llm_calls(), 1);
    assert_eq!(t.final_answer.as_deref(), Some("a cat"));
}

#[test]
fn unparseable_queries_fall_back_to_surface() {
    let f = Fixture::load("toy");
    let q = question(&f, 0);
    let inner = "of the film Zephyrine";
    let outer = "the director of the film Zephyrine";
    let gw = scripted(&[
        (&format!("qg_multihop::{inner}"), "I would look it up."),
        (&format!("sag::{inner}"), "Zephyrine is a film."),
        (&format!("qg_multihop::{outer}"), "response: Who directed Zephyrine?"),
        (&format!("sag::{outer}"), "Mara Quell, born in Lisbon."),
        (&format!("fag_multihop::{}", q.text), "no marker, Lisbon"),
    ]);
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let t = p.run_treerare(&q, &f.trees[q.id]);
    let first = &t.node_records[0];
    assert_eq!(first.queries.as_ref().unwrap().selected, vec![inner.to_string()]);
    assert!(first.flags.contains(&TraceFlag::EmptyQueryList));
    assert!(t.flags.contains(&TraceFlag::FormatViolation));
    assert_eq!(t.final_answer.as_deref(), Some("no marker, Lisbon"));
}

#[test]
fn failed_node_is_skipped_and_run_continues() {
    let f = Fixture::load("toy");
    let q = question(&f, 0);
    let inner = "of the film Zephyrine";
    let outer = "the director of the film Zephyrine";
    // no SAG entry for the inner node
    let gw = scripted(&[
        (&format!("qg_multihop::{inner}"), "response: What is Zephyrine?"),
        (&format!("qg_multihop::{outer}"), "response: Who directed Zephyrine?"),
        (&format!("sag::{outer}"), "Mara Quell, born in Lisbon."),
        (&format!("fag_multihop::{}", q.text), "FINAL: Lisbon"),
    ]);
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let t = p.run_treerare(&q, &f.trees[q.id]);
    assert!(t.node_records[0].error.as_deref().unwrap().contains("subcomponent answer"));
    assert!(t.node_records[0].evidence.is_none());
    let parent = &t.node_records[1];
    assert!(parent.flags.contains(&TraceFlag::MissingChildEvidence {
        child: t.node_records[0].node_id
    }));
    assert_eq!(t.final_answer.as_deref(), Some("Lisbon"));
    assert!(t.fatal_error.is_none());
}

#[test]
fn fatal_error_when_final_call_fails() {
    let f = Fixture::load("toy");
    let q = question(&f, 0);
    let gw = scripted(&[]);
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let t = p.run_treerare(&q, &f.trees[q.id]);
    assert!(t.final_answer.is_none());
    assert!(t.fatal_error.is_some());
    assert!(t.node_records.iter().all(|r| r.error.is_some()));
}

#[test]
fn leaf_evidence_mode_skips_calls_for_leaves() {
    let f = Fixture::load("toy");
    let cfg = PipelineConfig {
        leaf_mode: LeafMode::Evidence,
        ..PipelineConfig::default()
    };
    let t = &run_toy(&cfg, &f)[0];
    let leaf = &t.node_records[0];
    assert!(leaf.flags.contains(&TraceFlag::LeafEvidence));
    assert_eq!(leaf.evidence.as_ref().unwrap().text, leaf.surface);
    assert_eq!(t.llm_calls(), 3);
}

#[test]
fn ablation_structure() {
    let f = Fixture::load("toy");
    let gw = f.gateway();
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let q = question(&f, 0);
    let tree = &f.trees[q.id];
    let run = |m| p.run_ablation(&q, m, Some(tree)).unwrap();

    let no_ir = run(Ablation::NoIr);
    assert_eq!(no_ir.search_calls, 0);
    assert!(no_ir.node_records.iter().all(|r| r.evidence.is_some() && r.merged.is_empty()));

    let no_qg = run(Ablation::NoQg);
    for r in &no_qg.node_records {
        assert_eq!(r.queries.as_ref().unwrap().selected, vec![r.surface.clone()]);
        assert_eq!(r.retrievals.len(), 1);
    }
    assert!(no_qg.usage.iter().all(|u| u.stage != Stage::Qg));

    let no_sag = run(Ablation::NoSag);
    for r in &no_sag.node_records {
        let docs: Vec<&str> = r
            .merged
            .iter()
            .map(|d| f.index.paragraph(&d.doc_id).unwrap().text.as_str())
            .collect();
        assert_eq!(r.evidence.as_ref().unwrap().text, docs.join("\n"));
    }
    assert!(no_sag.usage.iter().all(|u| u.stage != Stage::Sag));

    let ir_only = p.run_ablation(&q, Ablation::IrOnly, None).unwrap();
    assert_eq!((ir_only.search_calls, ir_only.llm_calls()), (1, 1));
    assert!(ir_only.node_records.is_empty());

    let cot = p.run_ablation(&q, Ablation::CotOnly, None).unwrap();
    assert_eq!((cot.search_calls, cot.llm_calls()), (0, 1));

    let qg_only = run(Ablation::QgOnly);
    assert_eq!(qg_only.search_calls, 0);
    assert!(qg_only.usage.iter().all(|u| u.stage != Stage::Sag));
    for t in [&no_ir, &no_qg, &no_sag, &ir_only, &cot, &qg_only] {
        assert_eq!(t.final_answer.as_deref(), Some("Lisbon"), "{}", t.method);
    }

    assert!(p.run_ablation(&q, Ablation::NoQg, None).is_err());
}

#[test]
fn tree_retrieval_pools_and_reranks() {
    let (index, tree) = disjoint_fixture();
    let gw = scripted(&[(&format!("fag_multihop::{DISJOINT_Q}"), "FINAL: done")]);
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &index, &gw).unwrap();
    let q = Question { id: "d", text: DISJOINT_Q };

    let t = p.run_tree_retrieval(&q, &tree, &PassthroughScorer);
    assert_eq!(t.method, Method::TreeRetrieval(Formalism::Constituency));
    assert_eq!(t.node_records.len(), 3);
    assert_eq!(t.llm_calls(), 1);
    assert_eq!(t.search_calls, 4);
    let root = t.root_record.as_ref().unwrap();
    let rr = root.rerank.as_ref().unwrap();
    // three disjoint children of ten hits each; the root's own hits are drawn from them
    assert_eq!(rr.pool.len(), 30);
    assert!(rr.pool.len() <= 10 * 4);
    assert_eq!(rr.selected.len(), 15);
    let by_bm25: Vec<&str> = rr.pool.iter().take(15).map(|d| d.doc_id.as_str()).collect();
    let chosen: Vec<&str> = rr.selected.iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(chosen, by_bm25);
    for r in &t.node_records {
        assert_eq!(r.rerank.as_ref().unwrap().pool.len(), 10);
    }
    assert_eq!(t.final_answer.as_deref(), Some("done"));

    let rev = p.run_tree_retrieval(&q, &tree, &NegatedScorer);
    let rr = rev.root_record.as_ref().unwrap().rerank.as_ref().unwrap();
    // equal scores keep pool order, so compare as sets
    let worst: HashSet<&str> = rr.pool.iter().rev().take(15).map(|d| d.doc_id.as_str()).collect();
    let chosen: HashSet<&str> = rr.selected.iter().map(|d| d.doc_id.as_str()).collect();
    assert_eq!(chosen, worst);
}

#[test]
fn tree_retrieval_on_toy_question() {
    let f = Fixture::load("toy");
    let gw = f.gateway();
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let q = question(&f, 0);
    let t = p.run_tree_retrieval(&q, &f.trees[q.id], &PassthroughScorer);
    let rr = t.root_record.as_ref().unwrap().rerank.as_ref().unwrap();
    assert!(rr.selected.len() <= 15 && rr.selected.len() == rr.pool.len().min(15));
    assert_eq!(t.final_answer.as_deref(), Some("Lisbon"));
}

#[test]
fn run_dispatch_checks_inputs() {
    let f = Fixture::load("toy");
    let gw = f.gateway();
    let cfg = PipelineConfig::default();
    let p = Pipeline::new(&cfg, &f.index, &gw).unwrap();
    let q = question(&f, 0);
    let tree = &f.trees[q.id];
    let ct = Method::TreeRare(Formalism::Constituency);
    assert!(p.run(ct, &q, Some(tree), None).is_err());
    let tr = Method::TreeRetrieval(tree.formalism);
    assert!(p.run(tr, &q, Some(tree), None).is_err());
    assert!(p.run(tr, &q, Some(tree), Some(&PassthroughScorer)).is_ok());
}

#[test]
fn method_names_round_trip() {
    for s in [
        "treerare-dt",
        "treerare-ct",
        "tree-retrieval-dt",
        "tree-retrieval-ct",
        "ablation:no-qg",
        "ablation:no-sag",
        "ablation:no-ir",
        "ablation:ir-only",
        "ablation:qg-only",
        "ablation:cot-only",
    ] {
        let m: Method = s.parse().unwrap();
        assert_eq!(m.to_string(), s);
    }
    assert!("treerare-xx".parse::<Method>().is_err());
}

#[test]
fn invalid_config_rejected() {
    let f = Fixture::load("toy");
    let gw = scripted(&[]);
    let cfg = PipelineConfig {
        selected_per_node: 6,
        ..PipelineConfig::default()
    };
    assert!(Pipeline::new(&cfg, &f.index, &gw).is_err());
}
