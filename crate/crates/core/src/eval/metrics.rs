use std::collections::HashMap;

/// Standard answer normalization: lowercase, punctuation removed, whitespace
/// collapsed, one leading article (`a`, `an`, `the`) dropped.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    let mut tokens = cleaned.split_whitespace().peekable();
    if matches!(tokens.peek(), Some(&("a" | "an" | "the"))) {
        tokens.next();
    }
    tokens.collect::<Vec<_>>().join(" ")
}

/// Whether `gold` occurs in `prediction` after normalization. A gold that
/// normalizes to nothing (e.g. pure punctuation) is compared lowercased and
/// trimmed instead, so it cannot match vacuously.
pub(crate) fn contains(prediction: &str, gold: &str) -> bool {
    let g = normalize(gold);
    if g.is_empty() {
        let raw = gold.trim().to_lowercase();
        return !raw.is_empty() && prediction.to_lowercase().contains(&raw);
    }
    normalize(prediction).contains(&g)
}

/// 1 if any gold answer is contained in the prediction, else 0.
pub fn cover_em(prediction: &str, golds: &[String]) -> f64 {
    if golds.iter().any(|g| contains(prediction, g)) {
        1.0
    } else {
        0.0
    }
}

fn fraction_contained(prediction: &str, golds: &[String]) -> f64 {
    if golds.is_empty() {
        return 0.0;
    }
    let hit = golds.iter().filter(|g| contains(prediction, g)).count();
    hit as f64 / golds.len() as f64
}

/// Fraction of gold answers contained in the prediction.
pub fn answer_recall(prediction: &str, gold_answers: &[String]) -> f64 {
    fraction_contained(prediction, gold_answers)
}

/// Fraction of gold entity surface forms contained in the prediction.
pub fn entity_recall(prediction: &str, gold_entities: &[String]) -> f64 {
    fraction_contained(prediction, gold_entities)
}

/// Token-level F1 between two texts after normalization (bag of tokens).
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let p = normalize(prediction);
    let g = normalize(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    f1_tokens(&pt, &gt)
}

pub(crate) fn f1_tokens(pred: &[&str], gold: &[&str]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}
