use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::metrics::{contains, f1_tokens, normalize, token_f1};
use super::{EvalError, QaPair};

/// Pulls the answer to `question` out of a long-form prediction.
pub trait AnswerExtractor: Send + Sync {
    fn extract(&self, prediction: &str, question: &str) -> Result<String, EvalError>;
}

/// Remote reading-comprehension model: `POST {question, context}` -> `{answer}`.
pub struct HttpExtractor {
    url: String,
    agent: ureq::Agent,
}

impl HttpExtractor {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpExtractor {
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

#[derive(Serialize)]
struct ExtractRequest<'a> {
    question: &'a str,
    context: &'a str,
}

#[derive(Deserialize)]
struct ExtractResponse {
    answer: String,
}

impl AnswerExtractor for HttpExtractor {
    fn extract(&self, prediction: &str, question: &str) -> Result<String, EvalError> {
        let resp = self
            .agent
            .post(&self.url)
            .send_json(ExtractRequest {
                question,
                context: prediction,
            })
            .map_err(|e| EvalError::ScorerUnavailable(e.to_string()))?;
        let body: ExtractResponse = resp
            .into_json()
            .map_err(|e| EvalError::ScorerUnavailable(format!("bad response body: {e}")))?;
        Ok(body.answer)
    }
}

/// How each disambiguated sub-answer is scored.
pub enum DisambigScorer {
    /// No extractor: 1 if the gold short answer is contained in the
    /// prediction, else the best token F1 over prediction windows as long as
    /// the gold answer. Reported as a proxy.
    Containment,
    Extractor(Box<dyn AnswerExtractor>),
}

impl DisambigScorer {
    pub fn is_proxy(&self) -> bool {
        matches!(self, DisambigScorer::Containment)
    }

    fn score_pair(&self, prediction: &str, pair: &QaPair) -> Result<f64, EvalError> {
        let best = |f: &dyn Fn(&str) -> f64| pair.answers.iter().map(|a| f(a)).fold(0.0, f64::max);
        match self {
            DisambigScorer::Containment => Ok(best(&|gold| containment_f1(prediction, gold))),
            DisambigScorer::Extractor(x) => {
                let extracted = x.extract(prediction, &pair.question)?;
                Ok(best(&|gold| token_f1(&extracted, gold)))
            }
        }
    }
}

fn containment_f1(prediction: &str, gold: &str) -> f64 {
    if contains(prediction, gold) {
        return 1.0;
    }
    let p = normalize(prediction);
    let g = normalize(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    if pt.len() <= gt.len() {
        return f1_tokens(&pt, &gt);
    }
    pt.windows(gt.len().max(1))
        .map(|w| f1_tokens(w, &gt))
        .fold(0.0, f64::max)
}

/// Mean over sub-questions of the sub-answer score; a pair with several
/// acceptable short answers takes the best one.
pub fn disambig_f1(prediction: &str, qa_pairs: &[QaPair], scorer: &DisambigScorer) -> Result<f64, EvalError> {
    if qa_pairs.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for pair in qa_pairs {
        total += scorer.score_pair(prediction, pair)?;
    }
    Ok(total / qa_pairs.len() as f64)
}
