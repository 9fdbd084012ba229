//! Shared helpers for integration and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use treerare::eval::{load_dataset, DatasetFormat, QaPair, QuestionRecord};
use treerare::index::{read_corpus, Bm25Params, Index, Paragraph};
use treerare::llm::{
    Gateway, LedgerEntry, MockProvider, ModelParams, PricingTable, Rate, Stage, TemplateId, TranscriptEntry, Usage,
};
use treerare::syntax::{parse_conllu, parse_ptb, SyntaxTree, Token};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub struct Fixture {
    pub index: Index,
    pub questions: Vec<QuestionRecord>,
    pub trees: HashMap<String, SyntaxTree>,
    pub transcript: PathBuf,
}

impl Fixture {
    pub fn load(name: &str) -> Fixture {
        let dir = fixtures().join(name);
        let corpus = read_corpus(&dir.join("corpus.jsonl")).unwrap();
        let index = Index::build(corpus, Bm25Params::default()).unwrap();
        let questions = load_dataset(&dir.join("questions.jsonl"), DatasetFormat::Unified).unwrap();
        let trees = questions
            .iter()
            .map(|q| {
                let raw = std::fs::read_to_string(dir.join("parses").join(format!("{}.conllu", q.id))).unwrap();
                (q.id.clone(), parse_conllu(&raw).unwrap())
            })
            .collect();
        Fixture {
            index,
            questions,
            trees,
            transcript: dir.join("transcript.jsonl"),
        }
    }

    pub fn gateway(&self) -> Gateway {
        let mock = MockProvider::load(&self.transcript).unwrap();
        Gateway::new(Box::new(mock), ModelParams::default())
    }
}

pub fn scripted(entries: &[(&str, &str)]) -> Gateway {
    let mock = MockProvider::new(entries.iter().map(|(k, v)| TranscriptEntry {
        key: k.to_string(),
        response_text: v.to_string(),
        prompt_tokens: 100,
        completion_tokens: 10,
    }));
    Gateway::new(Box::new(mock), ModelParams::default())
}

// ---------------------------------------------------------------------------
// Brute-force BM25, written from the formula and sharing no code with the
// index: every query term occurrence contributes
//   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
// with idf(t) = max(0, ln(1 + (N - df + 0.5) / (df + 0.5))). A paragraph's
// indexed text is its title followed by its body.

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn oracle_bm25(docs: &[Paragraph], query: &str, k1: f64, b: f64) -> Vec<(String, f64)> {
    let toks: Vec<Vec<String>> = docs
        .iter()
        .map(|d| oracle_tokens(&format!("{} {}", d.title, d.text)))
        .collect();
    let n = docs.len() as f64;
    let avgdl = toks.iter().map(|t| t.len() as f64).sum::<f64>() / n;
    let q = oracle_tokens(query);
    let mut out = Vec::new();
    for (d, dt) in docs.iter().zip(&toks) {
        let mut score = 0.0;
        let mut matched = false;
        for term in &q {
            let tf = dt.iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            matched = true;
            let df = toks.iter().filter(|t| t.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln().max(0.0);
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dt.len() as f64 / avgdl));
        }
        if matched {
            out.push((d.doc_id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

const VOCAB: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "river", "mountain", "film", "director", "born", "city", "paris",
    "rome", "album", "band", "song", "war", "king", "queen", "ship", "river", "novel", "author", "prize",
];

pub fn random_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<Paragraph> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(3..40);
            let words: Vec<&str> = (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect();
            Paragraph {
                doc_id: format!("d{i:03}"),
                title: String::new(),
                text: words.join(" "),
            }
        })
        .collect()
}

pub fn random_query<R: Rng>(rng: &mut R) -> String {
    let len = rng.gen_range(1..6);
    (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Random dependency trees.

const DEPRELS: &[&str] = &[
    "nsubj", "obj", "obl", "nmod", "amod", "advmod", "det", "case", "punct", "cc", "conj", "mark", "acl",
    "det:poss", "compound", "flat",
];

/// Random well-formed heads for `n` tokens: a random root, then every other
/// token attaches to a random token already in the tree.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> SyntaxTree {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0usize; n];
    for (pos, &tok) in order.iter().enumerate().skip(1) {
        heads[tok - 1] = order[rng.gen_range(0..pos)];
    }
    let tokens: Vec<Token> = (1..=n)
        .map(|i| Token {
            index: i,
            surface: format!("w{i}"),
            upos: "X".into(),
            deprel: Some(if heads[i - 1] == 0 { "root" } else { DEPRELS.choose(rng).unwrap() }.to_string()),
        })
        .collect();
    SyntaxTree::from_heads(tokens, &heads).unwrap()
}

/// Sorted multiset view for comparing id lists.
pub fn counts<T: Ord + Clone>(items: &[T]) -> BTreeMap<T, usize> {
    let mut m = BTreeMap::new();
    for i in items {
        *m.entry(i.clone()).or_default() += 1;
    }
    m
}

// ---------------------------------------------------------------------------
// Hand-computed metric cases.

#[derive(serde::Deserialize)]
pub struct MetricCase {
    pub prediction: String,
    #[serde(default)]
    pub gold: Vec<String>,
    #[serde(default)]
    pub qa_pairs: Vec<QaPair>,
    /// Exact rational, e.g. `"2/3"`.
    pub expected: String,
}

impl MetricCase {
    pub fn expected(&self) -> f64 {
        match self.expected.split_once('/') {
            Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
            None => self.expected.parse().unwrap(),
        }
    }
}

pub fn metric_cases() -> BTreeMap<String, Vec<MetricCase>> {
    let raw = std::fs::read_to_string(fixtures().join("metrics/cases.json")).unwrap();
    serde_json::from_str(&raw).unwrap()
}

/// Scores one case with the named metric.
pub fn score_case(metric: &str, c: &MetricCase) -> f64 {
    use treerare::eval::*;
    match metric {
        "cover_em" => cover_em(&c.prediction, &c.gold),
        "answer_recall" => answer_recall(&c.prediction, &c.gold),
        "entity_recall" => entity_recall(&c.prediction, &c.gold),
        "token_f1" => token_f1(&c.prediction, &c.gold[0]),
        "dis_f1" => disambig_f1(&c.prediction, &c.qa_pairs, &DisambigScorer::Containment).unwrap(),
        other => panic!("unknown metric {other}"),
    }
}

// ---------------------------------------------------------------------------
// Synthetic 100-completion ledger. Entry i: stage cycles qg/sag/fag, model
// alternates (even: gpt-4o-mini, odd: llama-3.1-70b), prompt = 1000 + 10i,
// completion = 100 + i tokens.
//
// By hand: even entries carry 74_500 prompt / 7_450 completion tokens, odd
// ones 75_000 / 7_500. At 0.15/0.60 and 0.88/0.88 USD per 1k:
//   74.5*0.15 + 7.45*0.60 + 75*0.88 + 7.5*0.88 = 11.175 + 4.47 + 66 + 6.6
pub const SYNTHETIC_USD: f64 = 88.245;

pub fn synthetic_ledger() -> Vec<LedgerEntry> {
    (0..100u64)
        .map(|i| LedgerEntry {
            stage: [Stage::Qg, Stage::Sag, Stage::Fag][(i % 3) as usize],
            node: None,
            template: TemplateId::Sag,
            provider: "mock".into(),
            model: if i % 2 == 0 { "gpt-4o-mini" } else { "llama-3.1-70b" }.into(),
            usage: Usage {
                prompt_tokens: 1000 + 10 * i,
                completion_tokens: 100 + i,
                estimated: false,
            },
            latency_ms: 0,
        })
        .collect()
}

pub fn synthetic_pricing() -> PricingTable {
    PricingTable::new([
        ("gpt-4o-mini".to_string(), Rate { input_usd_per_1k: 0.15, output_usd_per_1k: 0.60 }),
        ("llama-3.1-70b".to_string(), Rate { input_usd_per_1k: 0.88, output_usd_per_1k: 0.88 }),
    ])
    .unwrap()
}

// ---------------------------------------------------------------------------
// Tree-Retrieval fixture.

/// Three phrases whose words each hit a disjoint group of twelve paragraphs.
pub fn disjoint_fixture() -> (Index, SyntaxTree) {
    let mut corpus = Vec::new();
    for (group, word) in ["aa", "ba", "ca"].iter().enumerate() {
        for i in 0..12 {
            corpus.push(Paragraph {
                doc_id: format!("g{group}_{i:02}"),
                title: String::new(),
                text: format!("{word} {}", vec!["pad"; i].join(" ")),
            });
        }
    }
    let index = Index::build(corpus, Bm25Params::default()).unwrap();
    let tree = parse_ptb("(S (NP (NN aa) (NN ab) (NN ac)) (VP (VB ba) (NN bb) (NN bc)) (PP (IN ca) (NN cb) (NN cc)))")
        .unwrap();
    (index, tree)
}

pub const DISJOINT_Q: &str = "aa ab ac ba bb bc ca cb cc?";
