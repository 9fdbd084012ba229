use std::collections::HashSet;

/// Function words ignored when measuring how much new ground a query covers.
const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "being", "between", "both", "but", "by", "can", "could", "did", "do", "does", "during", "each",
    "for", "from", "had", "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "many", "much", "of", "on", "or", "other", "she", "so", "some", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "to", "was", "were", "what",
    "when", "where", "which", "who", "whom", "whose", "why", "will", "with", "would", "you",
];

/// Lowercase, punctuation removed, whitespace collapsed.
pub fn normalize_query(text: &str) -> String {
    let kept: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn content_tokens(normalized: &str) -> HashSet<&str> {
    normalized
        .split_whitespace()
        .filter(|t| !STOPWORDS.contains(t))
        .collect()
}

/// Candidate queries from a QG completion.
///
/// Reads what follows the last `response:` marker (case-insensitive); without
/// a marker the whole text is used, but only if it contains a `;` separator.
/// Items are split on `;` and newlines; list bullets and numbering are
/// stripped and items without any alphanumeric character dropped. Returns at
/// most `max` items, in generation order.
pub fn parse_query_response(text: &str, max: usize) -> Vec<String> {
    let lower = text.to_ascii_lowercase();
    let body = match lower.rfind("response:") {
        Some(pos) => &text[pos + "response:".len()..],
        None if text.contains(';') => text,
        None => return Vec::new(),
    };
    body.split([';', '\n'])
        .map(strip_bullet)
        .filter(|q| q.chars().any(char::is_alphanumeric))
        .map(str::to_string)
        .take(max)
        .collect()
}

fn strip_bullet(item: &str) -> &str {
    let item = item.trim();
    let item = item.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = item.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &item[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim();
        }
    }
    item
}

/// Picks up to `limit` queries covering the most ground.
///
/// Candidates equal after [`normalize_query`] are collapsed to their first
/// occurrence. Then, greedily, the candidate with the most content tokens not
/// yet covered by earlier picks is taken; ties go to the earlier candidate.
pub fn select_queries(candidates: &[String], limit: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let pool: Vec<(&String, String)> = candidates
        .iter()
        .map(|c| (c, normalize_query(c)))
        .filter(|(_, n)| !n.is_empty() && seen.insert(n.clone()))
        .collect();
    let tokens: Vec<HashSet<&str>> = pool.iter().map(|(_, n)| content_tokens(n)).collect();

    let mut covered: HashSet<&str> = HashSet::new();
    let mut taken = vec![false; pool.len()];
    let mut out = Vec::new();
    while out.len() < limit {
        let best = (0..pool.len())
            .filter(|&i| !taken[i])
            .map(|i| (i, tokens[i].difference(&covered).count()))
            // max_by_key keeps the last maximum; compare with reversed index
            // so the earliest candidate wins ties.
            .max_by_key(|&(i, novel)| (novel, std::cmp::Reverse(i)));
        let Some((i, _)) = best else { break };
        taken[i] = true;
        covered.extend(tokens[i].iter().copied());
        out.push(pool[i].0.clone());
    }
    out
}
