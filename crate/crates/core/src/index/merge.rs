use std::cmp::Ordering;
use std::collections::HashMap;

use super::{RetrievalResult, ScoredDoc};

/// Union of several result lists by doc_id. A document retrieved by more than
/// one query keeps its best score; the union is re-sorted by that score with
/// ties broken by ascending doc_id.
pub fn merge_results<'a, I>(results: I) -> Vec<ScoredDoc>
where
    I: IntoIterator<Item = &'a RetrievalResult>,
{
    merge_scored(results.into_iter().flat_map(|r| r.hits.iter()))
}

pub(crate) fn merge_scored<'a, I>(docs: I) -> Vec<ScoredDoc>
where
    I: IntoIterator<Item = &'a ScoredDoc>,
{
    let mut best: HashMap<&str, f64> = HashMap::new();
    for hit in docs {
        best.entry(hit.doc_id.as_str())
            .and_modify(|s| {
                if hit.score > *s {
                    *s = hit.score
                }
            })
            .or_insert(hit.score);
    }
    let mut out: Vec<ScoredDoc> = best
        .into_iter()
        .map(|(id, score)| ScoredDoc {
            doc_id: id.to_string(),
            score,
        })
        .collect();
    sort_scored(&mut out);
    out
}

pub(crate) fn sort_scored(docs: &mut [ScoredDoc]) {
    docs.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
}
