use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Paragraph, ScoredDoc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("relevance scorer unavailable: {0}")]
    Unavailable(String),
    #[error("relevance scorer returned {got} scores for {expected} passages")]
    LengthMismatch { expected: usize, got: usize },
    #[error("relevance scorer returned a non-finite score at position {0}")]
    NonFinite(usize),
}

/// A first-stage hit together with its paragraph.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub paragraph: &'a Paragraph,
    pub bm25_score: f64,
}

/// Scores passages against an anchor text. Higher is more relevant.
pub trait RelevanceScorer: Send + Sync {
    fn score(&self, anchor: &str, candidates: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError>;
}

/// Keeps the first-stage BM25 score.
#[derive(Debug, Default, Clone, Copy)]
pub struct PassthroughScorer;

impl RelevanceScorer for PassthroughScorer {
    fn score(&self, _anchor: &str, candidates: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        Ok(candidates.iter().map(|c| c.bm25_score).collect())
    }
}

/// Negated BM25; selects what BM25 ranks worst. Useful to check that a
/// reranking stage is really applied.
#[derive(Debug, Default, Clone, Copy)]
pub struct NegatedScorer;

impl RelevanceScorer for NegatedScorer {
    fn score(&self, _anchor: &str, candidates: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        Ok(candidates.iter().map(|c| -c.bm25_score).collect())
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    anchor: &'a str,
    passages: Vec<String>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// Remote cross-encoder: `POST {anchor, passages[]}` -> `{scores[]}`.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    url: String,
    agent: ureq::Agent,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        HttpScorer {
            url: url.into(),
            agent,
        }
    }
}

impl RelevanceScorer for HttpScorer {
    fn score(&self, anchor: &str, candidates: &[Candidate<'_>]) -> Result<Vec<f64>, ScorerError> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let body = ScoreRequest {
            anchor,
            passages: candidates.iter().map(|c| passage_text(c.paragraph)).collect(),
        };
        let resp = self
            .agent
            .post(&self.url)
            .send_json(&body)
            .map_err(|e| ScorerError::Unavailable(e.to_string()))?;
        let parsed: ScoreResponse = resp
            .into_json()
            .map_err(|e| ScorerError::Unavailable(format!("bad response body: {e}")))?;
        Ok(parsed.scores)
    }
}

fn passage_text(p: &Paragraph) -> String {
    if p.title.is_empty() {
        p.text.clone()
    } else {
        format!("{}: {}", p.title, p.text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankedDoc {
    pub doc_id: String,
    pub bm25_score: f64,
    pub rerank_score: f64,
}

/// Re-sorts candidates by the scorer's output and keeps the best `m`.
/// Equal scores keep their incoming order.
pub fn rerank(
    candidates: &[Candidate<'_>],
    anchor: &str,
    scorer: &dyn RelevanceScorer,
    m: usize,
) -> Result<Vec<RerankedDoc>, ScorerError> {
    let scores = scorer.score(anchor, candidates)?;
    if scores.len() != candidates.len() {
        return Err(ScorerError::LengthMismatch {
            expected: candidates.len(),
            got: scores.len(),
        });
    }
    if let Some(pos) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ScorerError::NonFinite(pos));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(order
        .into_iter()
        .take(m)
        .map(|i| RerankedDoc {
            doc_id: candidates[i].paragraph.doc_id.clone(),
            bm25_score: candidates[i].bm25_score,
            rerank_score: scores[i],
        })
        .collect())
}

/// Pairs scored hits with their paragraphs, dropping ids the lookup misses.
pub(crate) fn candidates_from<'a, F>(hits: &[ScoredDoc], lookup: F) -> Vec<Candidate<'a>>
where
    F: Fn(&str) -> Option<&'a Paragraph>,
{
    hits.iter()
        .filter_map(|h| {
            lookup(&h.doc_id).map(|p| Candidate {
                paragraph: p,
                bm25_score: h.score,
            })
        })
        .collect()
}
