//! BM25 inverted index over a paragraph corpus.
//!
//! Scoring uses the Robertson/Spärck Jones form with the non-negative IDF
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! score(d, q) = sum over query tokens t of
//!               idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//! ```
//!
//! Repeated query tokens contribute once per occurrence. Only documents that
//! contain at least one query token are returned; ties are broken by
//! ascending `doc_id`.

mod merge;
mod rerank;
mod store;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use merge::merge_results;
pub use rerank::{
    rerank, Candidate, HttpScorer, NegatedScorer, PassthroughScorer, RelevanceScorer, RerankedDoc,
    ScorerError,
};
pub(crate) use rerank::candidates_from;
pub(crate) use store::hex;
pub use store::{read_meta, IndexMeta, TOKENIZER_ID};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("paragraph {0:?} has empty text")]
    EmptyText(String),
    #[error("query has no indexable tokens")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("corpus line {line}: {reason}")]
    CorpusLine { line: usize, reason: String },
    #[error("index format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One retrievable unit of the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    #[serde(rename = "id")]
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: String,
    /// Score descending, ties by ascending doc_id.
    pub hits: Vec<ScoredDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position of the document in doc_id order.
    pub doc: u32,
    pub tf: u32,
}

/// Lowercase, split on anything that is not alphanumeric, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Anything that can answer top-k queries over paragraphs. BM25 is the
/// shipped implementation; a dense retriever would plug in here.
pub trait Retriever: Send + Sync {
    fn search(&self, query: &str, k: usize) -> Result<RetrievalResult, IndexError>;
    fn paragraph(&self, doc_id: &str) -> Option<&Paragraph>;
}

#[derive(Debug, Clone)]
pub struct Index {
    params: Bm25Params,
    docs: Vec<Paragraph>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    postings: BTreeMap<String, Vec<Posting>>,
    by_id: HashMap<String, u32>,
}

impl Index {
    /// Builds the index in memory. Use [`Index::save`] to persist it.
    pub fn build<I>(corpus: I, params: Bm25Params) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = Paragraph>,
    {
        let mut docs: Vec<Paragraph> = Vec::new();
        let mut seen = HashSet::new();
        for p in corpus {
            if !seen.insert(p.doc_id.clone()) {
                return Err(IndexError::DuplicateDocId(p.doc_id));
            }
            if p.text.trim().is_empty() {
                return Err(IndexError::EmptyText(p.doc_id));
            }
            docs.push(p);
        }
        if docs.is_empty() {
            return Err(IndexError::EmptyCorpus);
        }
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (i, p) in docs.iter().enumerate() {
            let mut tokens = tokenize(&p.title);
            tokens.extend(tokenize(&p.text));
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting {
                    doc: i as u32,
                    tf: count,
                });
            }
        }
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_length = total as f64 / docs.len() as f64;
        Ok(Self::assemble(params, docs, doc_lengths, avg_doc_length, postings))
    }

    fn assemble(
        params: Bm25Params,
        docs: Vec<Paragraph>,
        doc_lengths: Vec<u32>,
        avg_doc_length: f64,
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Self {
        let by_id = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i as u32))
            .collect();
        Index {
            params,
            docs,
            doc_lengths,
            avg_doc_length,
            postings,
            by_id,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.by_id.get(doc_id).map(|&i| self.doc_lengths[i as usize])
    }

    pub fn paragraphs(&self) -> &[Paragraph] {
        &self.docs
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.postings(term).len() as f64;
        if df == 0.0 {
            return 0.0;
        }
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln().max(0.0)
    }

    pub fn search(&self, query: &str, k: usize) -> Result<RetrievalResult, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let terms = tokenize(query);
        if terms.is_empty() {
            return Err(IndexError::EmptyQuery);
        }
        let Bm25Params { k1, b } = self.params;
        let avgdl = if self.avg_doc_length > 0.0 { self.avg_doc_length } else { 1.0 };
        let mut acc: Vec<f64> = vec![0.0; self.docs.len()];
        let mut matched = vec![false; self.docs.len()];
        for term in &terms {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(term);
            for p in list {
                let tf = p.tf as f64;
                let dl = self.doc_lengths[p.doc as usize] as f64;
                let norm = k1 * (1.0 - b + b * dl / avgdl);
                acc[p.doc as usize] += idf * tf * (k1 + 1.0) / (tf + norm);
                matched[p.doc as usize] = true;
            }
        }
        let mut hits: Vec<(usize, f64)> = matched
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(i, _)| (i, acc[i]))
            .collect();
        // doc positions follow doc_id order, so position breaks ties.
        hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        Ok(RetrievalResult {
            query: query.to_string(),
            hits: hits
                .into_iter()
                .map(|(i, score)| ScoredDoc {
                    doc_id: self.docs[i].doc_id.clone(),
                    score,
                })
                .collect(),
        })
    }

    pub fn get(&self, doc_id: &str) -> Option<&Paragraph> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i as usize])
    }
}

impl Retriever for Index {
    fn search(&self, query: &str, k: usize) -> Result<RetrievalResult, IndexError> {
        Index::search(self, query, k)
    }

    fn paragraph(&self, doc_id: &str) -> Option<&Paragraph> {
        self.get(doc_id)
    }
}

/// Reads a JSON-lines corpus of `{"id", "title", "text"}` objects.
pub fn read_corpus(path: &Path) -> Result<Vec<Paragraph>, IndexError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Paragraph = serde_json::from_str(&line).map_err(|e| IndexError::CorpusLine {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn para(id: &str, title: &str, text: &str) -> Paragraph {
    Paragraph {
        doc_id: id.into(),
        title: title.into(),
        text: text.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Index {
        Index::build(
            vec![
                para("d1", "Paris", "Paris is the capital of France."),
                para("d2", "Berlin", "Berlin is the capital of Germany"),
                para("d3", "Rivers", "The Seine flows through Paris, the French capital city!"),
            ],
            Bm25Params::default(),
        )
        .unwrap()
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(tokenize("Téa Leoni's co-star, 2001!"), ["téa", "leoni", "s", "co", "star", "2001"]);
        assert!(tokenize("?!... --").is_empty());
    }

    #[test]
    fn toy_corpus_statistics() {
        // d1: paris + "paris is the capital of france" = 7
        // d2: berlin + "berlin is the capital of germany" = 7
        // d3: rivers + "the seine flows through paris the french capital city" = 10
        let idx = toy();
        assert_eq!(idx.doc_count(), 3);
        assert!((idx.avg_doc_length() - 8.0).abs() < 1e-12);
        assert_eq!(idx.doc_length("d3"), Some(10));
        assert_eq!(idx.postings("paris"), &[Posting { doc: 0, tf: 2 }, Posting { doc: 2, tf: 1 }]);
    }

    #[test]
    fn single_word_document() {
        let idx = Index::build(vec![para("a", "", "Hello")], Bm25Params::default()).unwrap();
        assert_eq!(idx.term_count(), 1);
        assert_eq!(idx.postings("hello"), &[Posting { doc: 0, tf: 1 }]);
    }

    #[test]
    fn duplicate_and_empty_corpus() {
        let err = Index::build(vec![para("a", "", "x"), para("a", "", "y")], Bm25Params::default()).unwrap_err();
        assert!(matches!(err, IndexError::DuplicateDocId(id) if id == "a"));
        assert!(matches!(
            Index::build(Vec::new(), Bm25Params::default()),
            Err(IndexError::EmptyCorpus)
        ));
    }

    #[test]
    fn unique_match_ranks_first() {
        let res = toy().search("Germany", 3).unwrap();
        assert_eq!(res.hits.len(), 1);
        assert_eq!(res.hits[0].doc_id, "d2");
    }

    #[test]
    fn punctuation_query_is_empty() {
        assert!(matches!(toy().search("?!", 5), Err(IndexError::EmptyQuery)));
        assert!(matches!(toy().search("paris", 0), Err(IndexError::InvalidK)));
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = Index::build(
            vec![para("b", "", "same words"), para("a", "", "same words"), para("c", "", "other")],
            Bm25Params::default(),
        )
        .unwrap();
        let res = idx.search("same", 5).unwrap();
        let ids: Vec<_> = res.hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(res.hits[0].score, res.hits[1].score);
    }

    #[test]
    fn larger_k_keeps_earlier_hits() {
        let idx = toy();
        let small = idx.search("paris capital", 1).unwrap();
        let large = idx.search("paris capital", 3).unwrap();
        assert_eq!(small.hits[0], large.hits[0]);
    }
}
