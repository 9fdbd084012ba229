//! Datasets, sampling and answer metrics: COVER-EM, Answer/Entity Recall
//! (containment semantics) and Disambig-F1 with a pluggable extractor.

mod dataset;
mod disambig;
mod metrics;

use std::collections::HashMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use dataset::{load_dataset, parse_dataset, sample, DatasetFormat};
pub use disambig::{disambig_f1, AnswerExtractor, DisambigScorer, HttpExtractor};
pub use metrics::{answer_recall, cover_em, entity_recall, normalize, token_f1};

/// Seed used when none is given; shared by every method on a dataset so all
/// methods see the same subset.
pub const DEFAULT_SEED: u64 = 42;

/// Default subset size per dataset.
pub const DEFAULT_SAMPLE: usize = 500;

pub const RECALL_SEMANTICS: &str = "AmbigDocs-compatible (containment)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("line {line}: {reason}")]
    SchemaMismatch { line: usize, reason: String },
    #[error("cannot sample {requested} of {available} records")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("answer extractor unavailable: {0}")]
    ScorerUnavailable(String),
    #[error("io: {0}")]
    Io(String),
}

/// A disambiguated sub-question and its acceptable short answers.
/// Serialized as `{"q": .., "a": ..}` where `a` is a string or a list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub question: String,
    pub answers: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Serialize, Deserialize)]
struct QaPairWire {
    q: String,
    a: OneOrMany,
}

impl Serialize for QaPair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        QaPairWire {
            q: self.question.clone(),
            a: OneOrMany::Many(self.answers.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QaPair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = QaPairWire::deserialize(d)?;
        let answers = match w.a {
            OneOrMany::One(a) => vec![a],
            OneOrMany::Many(v) => v,
        };
        if answers.is_empty() {
            return Err(serde::de::Error::custom("qa pair without an answer"));
        }
        Ok(QaPair {
            question: w.q,
            answers,
        })
    }
}

/// One question in the unified schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub question: String,
    /// Acceptable short answers (never empty).
    pub answers: Vec<String>,
    /// Disambiguated entity surface forms (AmbigDoc).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<String>,
    /// Disambiguated sub-questions (ASQA).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qa_pairs: Vec<QaPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionScores {
    pub question_id: String,
    /// False when the run produced no answer; all scores are then 0.
    pub answered: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cover_em: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dis_f1: Option<f64>,
}

/// Arithmetic means over the questions a metric applies to.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub cover_em: Option<f64>,
    pub answer_recall: Option<f64>,
    pub entity_recall: Option<f64>,
    pub dis_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub format: DatasetFormat,
    pub method: String,
    pub sample_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub unanswered: usize,
    pub recall_semantics: String,
    /// `proxy` for the containment scorer, `extractor` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dis_f1_scorer: Option<String>,
    pub aggregates: Aggregates,
    pub per_question: Vec<QuestionScores>,
}

/// Which metrics a record gets, by dataset family.
fn applicable(format: DatasetFormat, rec: &QuestionRecord) -> (bool, bool, bool, bool) {
    let cover = format != DatasetFormat::AmbigDoc;
    let ar = format == DatasetFormat::AmbigDoc || (format == DatasetFormat::Unified && !rec.entities.is_empty());
    let er = !rec.entities.is_empty();
    let dis = !rec.qa_pairs.is_empty();
    (cover, ar, er, dis)
}

/// Scores `predictions` (question id -> final answer) against `records`.
/// Questions without a prediction score 0 and are counted as unanswered.
pub fn evaluate(
    dataset: &str,
    format: DatasetFormat,
    method: &str,
    records: &[QuestionRecord],
    predictions: &HashMap<String, String>,
    scorer: &DisambigScorer,
    seed: Option<u64>,
) -> Result<MetricsReport, EvalError> {
    let mut per_question = Vec::with_capacity(records.len());
    let mut unanswered = 0;
    for rec in records {
        let pred = predictions.get(&rec.id);
        if pred.is_none() {
            unanswered += 1;
        }
        let p = pred.map(String::as_str).unwrap_or("");
        let (cover, ar, er, dis) = applicable(format, rec);
        per_question.push(QuestionScores {
            question_id: rec.id.clone(),
            answered: pred.is_some(),
            cover_em: cover.then(|| cover_em(p, &rec.answers)),
            answer_recall: ar.then(|| answer_recall(p, &rec.answers)),
            entity_recall: er.then(|| entity_recall(p, &rec.entities)),
            dis_f1: if dis {
                Some(disambig_f1(p, &rec.qa_pairs, scorer)?)
            } else {
                None
            },
        });
    }
    let mean = |f: fn(&QuestionScores) -> Option<f64>| {
        let v: Vec<f64> = per_question.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let aggregates = Aggregates {
        cover_em: mean(|q| q.cover_em),
        answer_recall: mean(|q| q.answer_recall),
        entity_recall: mean(|q| q.entity_recall),
        dis_f1: mean(|q| q.dis_f1),
    };
    let dis_f1_scorer = aggregates
        .dis_f1
        .map(|_| if scorer.is_proxy() { "proxy" } else { "extractor" }.to_string());
    Ok(MetricsReport {
        dataset: dataset.to_string(),
        format,
        method: method.to_string(),
        sample_size: records.len(),
        seed,
        unanswered,
        recall_semantics: RECALL_SEMANTICS.to_string(),
        dis_f1_scorer,
        aggregates,
        per_question,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

/// Results laid out like the main results table: one row per method,
/// COVER-EM for the three multi-hop sets and their average, AR/ER for
/// AmbigDoc, Dis-F1/COVER-EM for ASQA. Reports whose dataset is none of the
/// five are listed underneath.
pub fn render_table(reports: &[MetricsReport]) -> String {
    const HEAD: [&str; 9] = [
        "Method",
        "HotpotQA COV-EM",
        "MuSiQue COV-EM",
        "2WikiMQA COV-EM",
        "AVG",
        "AmbigDoc AR",
        "AmbigDoc ER",
        "ASQA Dis-F1",
        "ASQA COV-EM",
    ];
    let family = |r: &MetricsReport| match r.format {
        DatasetFormat::Unified => r.dataset.to_ascii_lowercase().parse().unwrap_or(DatasetFormat::Unified),
        f => f,
    };
    let mut methods: Vec<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    let mut seen = std::collections::HashSet::new();
    methods.retain(|m| seen.insert(*m));

    let mut rows: Vec<Vec<String>> = vec![HEAD.iter().map(|s| s.to_string()).collect()];
    let mut other: Vec<&MetricsReport> = Vec::new();
    for m in &methods {
        let find = |f: DatasetFormat| reports.iter().find(|r| r.method == *m && family(r) == f);
        let hotpot = find(DatasetFormat::HotpotQa).and_then(|r| r.aggregates.cover_em);
        let musique = find(DatasetFormat::Musique).and_then(|r| r.aggregates.cover_em);
        let wiki = find(DatasetFormat::TwoWikiMqa).and_then(|r| r.aggregates.cover_em);
        let multihop: Vec<f64> = [hotpot, musique, wiki].into_iter().flatten().collect();
        let avg = (!multihop.is_empty()).then(|| multihop.iter().sum::<f64>() / multihop.len() as f64);
        let ambig = find(DatasetFormat::AmbigDoc);
        let asqa = find(DatasetFormat::Asqa);
        rows.push(vec![
            m.to_string(),
            cell(hotpot),
            cell(musique),
            cell(wiki),
            cell(avg),
            cell(ambig.and_then(|r| r.aggregates.answer_recall)),
            cell(ambig.and_then(|r| r.aggregates.entity_recall)),
            cell(asqa.and_then(|r| r.aggregates.dis_f1)),
            cell(asqa.and_then(|r| r.aggregates.cover_em)),
        ]);
        other.extend(reports.iter().filter(|r| r.method == *m && family(r) == DatasetFormat::Unified));
    }
    let mut out = align(&rows);
    if !other.is_empty() {
        let mut rows = vec![["Dataset", "Method", "COV-EM", "AR", "ER", "Dis-F1"]
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()];
        for r in other {
            rows.push(vec![
                r.dataset.clone(),
                r.method.clone(),
                cell(r.aggregates.cover_em),
                cell(r.aggregates.answer_recall),
                cell(r.aggregates.entity_recall),
                cell(r.aggregates.dis_f1),
            ]);
        }
        out.push('\n');
        out.push_str(&align(&rows));
    }
    out
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows[0].len();
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = width[c])
                } else {
                    format!("{s:>w$}", w = width[c])
                }
            })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
