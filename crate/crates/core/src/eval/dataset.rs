use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EvalError, QaPair, QuestionRecord};

/// Native schema of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetFormat {
    #[serde(rename = "unified")]
    Unified,
    #[serde(rename = "hotpotqa")]
    HotpotQa,
    #[serde(rename = "musique")]
    Musique,
    #[serde(rename = "2wikimqa")]
    TwoWikiMqa,
    #[serde(rename = "ambigdoc")]
    AmbigDoc,
    #[serde(rename = "asqa")]
    Asqa,
}

impl DatasetFormat {
    pub const ALL: [DatasetFormat; 6] = [
        DatasetFormat::Unified,
        DatasetFormat::HotpotQa,
        DatasetFormat::Musique,
        DatasetFormat::TwoWikiMqa,
        DatasetFormat::AmbigDoc,
        DatasetFormat::Asqa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetFormat::Unified => "unified",
            DatasetFormat::HotpotQa => "hotpotqa",
            DatasetFormat::Musique => "musique",
            DatasetFormat::TwoWikiMqa => "2wikimqa",
            DatasetFormat::AmbigDoc => "ambigdoc",
            DatasetFormat::Asqa => "asqa",
        }
    }

    /// Ambiguous-question datasets want long-form answers.
    pub fn is_ambiguous(self) -> bool {
        matches!(self, DatasetFormat::AmbigDoc | DatasetFormat::Asqa)
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetFormat::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown dataset format {s:?}"))
    }
}

/// Reads a dataset in `format`. Accepts JSON lines or a single JSON array;
/// error positions are line numbers for the former and 1-based element
/// numbers for the latter.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<QuestionRecord>, EvalError> {
    let raw = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&raw, format)
}

pub fn parse_dataset(raw: &str, format: DatasetFormat) -> Result<Vec<QuestionRecord>, EvalError> {
    let mut rows: Vec<(usize, Value)> = Vec::new();
    if raw.trim_start().starts_with('[') {
        let arr: Vec<Value> = serde_json::from_str(raw).map_err(|e| EvalError::SchemaMismatch {
            line: e.line(),
            reason: e.to_string(),
        })?;
        rows.extend(arr.into_iter().enumerate().map(|(i, v)| (i + 1, v)));
    } else {
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v = serde_json::from_str(line).map_err(|e| EvalError::SchemaMismatch {
                line: i + 1,
                reason: e.to_string(),
            })?;
            rows.push((i + 1, v));
        }
    }

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, v) in rows {
        let rec = adapt(&v, format).map_err(|reason| EvalError::SchemaMismatch { line, reason })?;
        if !seen.insert(rec.id.clone()) {
            return Err(EvalError::SchemaMismatch {
                line,
                reason: format!("duplicate id {:?}", rec.id),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

fn str_field<'a>(v: &'a Value, names: &[&str]) -> Result<&'a str, String> {
    for n in names {
        match v.get(n) {
            Some(Value::String(s)) => return Ok(s),
            Some(Value::Number(_)) => return Err(format!("field {n:?} must be a string")),
            _ => {}
        }
    }
    Err(format!("missing string field {:?}", names.join("|")))
}

fn str_list(v: Option<&Value>, name: &str) -> Result<Vec<String>, String> {
    match v {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|x| {
                x.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| format!("{name} must contain strings"))
            })
            .collect(),
        Some(Value::String(s)) => Ok(vec![s.clone()]),
        Some(_) => Err(format!("{name} must be a list of strings")),
    }
}

fn push_unique(out: &mut Vec<String>, items: impl IntoIterator<Item = String>) {
    for it in items {
        if !it.trim().is_empty() && !out.contains(&it) {
            out.push(it);
        }
    }
}

fn adapt(v: &Value, format: DatasetFormat) -> Result<QuestionRecord, String> {
    if !v.is_object() {
        return Err("expected a JSON object".into());
    }
    let mut rec = match format {
        DatasetFormat::Unified => {
            let qa_pairs: Vec<QaPair> = match v.get("qa_pairs") {
                None | Some(Value::Null) => Vec::new(),
                Some(x) => serde_json::from_value(x.clone()).map_err(|e| format!("qa_pairs: {e}"))?,
            };
            QuestionRecord {
                id: str_field(v, &["id"])?.to_string(),
                question: str_field(v, &["question"])?.to_string(),
                answers: str_list(v.get("answers"), "answers")?,
                entities: str_list(v.get("entities"), "entities")?,
                qa_pairs,
            }
        }
        DatasetFormat::HotpotQa | DatasetFormat::TwoWikiMqa | DatasetFormat::Musique => {
            let mut answers = vec![str_field(v, &["answer"])?.to_string()];
            push_unique(&mut answers, str_list(v.get("answer_aliases"), "answer_aliases")?);
            QuestionRecord {
                id: str_field(v, &["_id", "id"])?.to_string(),
                question: str_field(v, &["question"])?.to_string(),
                answers,
                entities: Vec::new(),
                qa_pairs: Vec::new(),
            }
        }
        DatasetFormat::AmbigDoc => {
            let docs = v
                .get("documents")
                .and_then(Value::as_array)
                .ok_or("missing documents list")?;
            let mut entities = Vec::new();
            let mut answers = Vec::new();
            for d in docs {
                push_unique(&mut entities, [str_field(d, &["title"])?.to_string()]);
                push_unique(&mut answers, [str_field(d, &["answer"])?.to_string()]);
            }
            QuestionRecord {
                id: str_field(v, &["qid", "id"])?.to_string(),
                question: str_field(v, &["question"])?.to_string(),
                answers,
                entities,
                qa_pairs: Vec::new(),
            }
        }
        DatasetFormat::Asqa => {
            let pairs = v.get("qa_pairs").and_then(Value::as_array).ok_or("missing qa_pairs list")?;
            let mut qa_pairs = Vec::new();
            let mut answers = Vec::new();
            for p in pairs {
                let shorts = str_list(p.get("short_answers"), "short_answers")?;
                push_unique(&mut answers, shorts.iter().cloned());
                qa_pairs.push(QaPair {
                    question: str_field(p, &["question"])?.to_string(),
                    answers: shorts,
                });
            }
            QuestionRecord {
                id: str_field(v, &["sample_id", "id"])?.to_string(),
                question: str_field(v, &["ambiguous_question", "question"])?.to_string(),
                answers,
                entities: Vec::new(),
                qa_pairs,
            }
        }
    };
    rec.answers.retain(|a| !a.trim().is_empty());
    if rec.answers.is_empty() {
        return Err("record has no gold answer".into());
    }
    Ok(rec)
}

/// `n` records chosen uniformly under `seed`, kept in their original order.
pub fn sample(records: &[QuestionRecord], n: usize, seed: u64) -> Result<Vec<QuestionRecord>, EvalError> {
    if n > records.len() {
        return Err(EvalError::SampleTooLarge {
            requested: n,
            available: records.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, records.len(), n).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}
