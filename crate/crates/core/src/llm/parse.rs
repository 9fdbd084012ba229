use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedFinal {
    pub answer: String,
    /// No usable `FINAL:` marker was found; `answer` is the whole text.
    pub format_violation: bool,
}

/// Extracts the text after the last `FINAL:` marker.
///
/// Matching is ASCII case-insensitive and tolerates `FINAL(Step 2):`. If no
/// marker is present, or nothing follows the last one, the whole completion
/// is returned trimmed and flagged.
pub fn parse_final(text: &str) -> ParsedFinal {
    let bytes = text.as_bytes();
    let mut found: Option<usize> = None;
    let mut i = 0;
    while i + 5 <= bytes.len() {
        if bytes[i..i + 5].eq_ignore_ascii_case(b"final") {
            if let Some(end) = marker_end(bytes, i + 5) {
                found = Some(end);
            }
        }
        i += 1;
    }
    if let Some(start) = found {
        let answer = text[start..].trim();
        if !answer.is_empty() {
            return ParsedFinal {
                answer: answer.to_string(),
                format_violation: false,
            };
        }
    }
    ParsedFinal {
        answer: text.trim().to_string(),
        format_violation: true,
    }
}

/// After the word "final": optional spaces, optional "(step 2)", optional
/// spaces, then ':'. Returns the offset just past the colon.
fn marker_end(bytes: &[u8], mut pos: usize) -> Option<usize> {
    let skip_spaces = |mut p: usize| {
        while p < bytes.len() && (bytes[p] == b' ' || bytes[p] == b'\t') {
            p += 1;
        }
        p
    };
    pos = skip_spaces(pos);
    if bytes.get(pos) == Some(&b'(') {
        let close = bytes[pos..].iter().position(|&b| b == b')')? + pos;
        let inner: Vec<u8> = bytes[pos + 1..close]
            .iter()
            .filter(|b| !b.is_ascii_whitespace())
            .map(|b| b.to_ascii_lowercase())
            .collect();
        if inner != b"step2" {
            return None;
        }
        pos = skip_spaces(close + 1);
    }
    (bytes.get(pos) == Some(&b':')).then_some(pos + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_marker() {
        let p = parse_final("Explanations: ...\nFINAL: Paris");
        assert_eq!(p.answer, "Paris");
        assert!(!p.format_violation);
    }

    #[test]
    fn step_two_marker() {
        let p = parse_final("Explanations (Step 2): x\nFINAL(Step 2): long answer…");
        assert_eq!(p.answer, "long answer…");
        assert!(!p.format_violation);
    }

    #[test]
    fn last_marker_wins_and_case_is_ignored() {
        let p = parse_final("FINAL: draft\nfinal : Rome ");
        assert_eq!(p.answer, "Rome");
    }

    #[test]
    fn no_marker_is_flagged() {
        let p = parse_final("no marker here");
        assert_eq!(p.answer, "no marker here");
        assert!(p.format_violation);
    }

    #[test]
    fn empty_after_marker_falls_back() {
        let p = parse_final("reasoning\nFINAL:   ");
        assert_eq!(p.answer, "reasoning\nFINAL:");
        assert!(p.format_violation);
    }

    #[test]
    fn word_final_without_colon_is_not_a_marker() {
        let p = parse_final("The final answer is 4");
        assert!(p.format_violation);
    }

    proptest! {
        #[test]
        fn total_and_non_empty(s in "\\PC*") {
            let p = parse_final(&s);
            if !s.trim().is_empty() {
                prop_assert!(!p.answer.is_empty());
            }
        }
    }
}
