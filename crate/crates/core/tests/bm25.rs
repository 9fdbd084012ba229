mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{oracle_bm25, random_corpus, random_query};
use treerare::index::{merge_results, Bm25Params, Index, Paragraph};

fn check(docs: Vec<Paragraph>, query: &str, params: Bm25Params) -> Result<(), TestCaseError> {
    let expected = oracle_bm25(&docs, query, params.k1, params.b);
    let index = Index::build(docs, params).unwrap();
    let got = index.search(query, usize::MAX).unwrap();
    prop_assert_eq!(got.hits.len(), expected.len());
    for (h, (id, score)) in got.hits.iter().zip(&expected) {
        prop_assert!((h.score - score).abs() < 1e-6, "{} {} vs {} {}", h.doc_id, h.score, id, score);
    }
    // ids agree wherever the oracle's scores are not tied
    for (i, (id, score)) in expected.iter().enumerate() {
        let tied = expected.iter().enumerate().any(|(j, (_, s))| j != i && (s - score).abs() < 1e-9);
        if !tied {
            prop_assert_eq!(&got.hits[i].doc_id, id);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, n);
        let query = random_query(&mut rng);
        check(docs, &query, Bm25Params::default())?;
    }

    #[test]
    fn matches_brute_force_other_params(seed in any::<u64>(), k1 in 0.1f64..3.0, b in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng, 30);
        let query = random_query(&mut rng);
        check(docs, &query, Bm25Params { k1, b })?;
    }

    #[test]
    fn top_k_is_a_prefix(seed in any::<u64>(), k in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = Index::build(random_corpus(&mut rng, 40), Bm25Params::default()).unwrap();
        let query = random_query(&mut rng);
        let all = index.search(&query, usize::MAX).unwrap();
        let top = index.search(&query, k).unwrap();
        prop_assert_eq!(&top.hits[..], &all.hits[..k.min(all.hits.len())]);
    }

    #[test]
    fn merge_keeps_best_score_per_doc(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let index = Index::build(random_corpus(&mut rng, 40), Bm25Params::default()).unwrap();
        let results: Vec<_> = (0..3).map(|_| index.search(&random_query(&mut rng), 15).unwrap()).collect();
        let merged = merge_results(&results);
        let mut ids: Vec<&str> = merged.iter().map(|d| d.doc_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), merged.len());
        for d in &merged {
            let best = results
                .iter()
                .flat_map(|r| &r.hits)
                .filter(|h| h.doc_id == d.doc_id)
                .map(|h| h.score)
                .fold(f64::MIN, f64::max);
            prop_assert_eq!(d.score, best);
        }
        prop_assert!(merged.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

#[test]
fn save_and_load_preserve_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let index = Index::build(random_corpus(&mut rng, 50), Bm25Params::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    index.save(dir.path()).unwrap();
    let loaded = Index::load(dir.path()).unwrap();
    for _ in 0..10 {
        let q = random_query(&mut rng);
        assert_eq!(index.search(&q, 15).unwrap(), loaded.search(&q, 15).unwrap());
    }
}

#[test]
fn unknown_terms_return_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let index = Index::build(random_corpus(&mut rng, 10), Bm25Params::default()).unwrap();
    assert!(index.search("zzzz qqqq", 15).unwrap().hits.is_empty());
}
