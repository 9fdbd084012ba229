use std::collections::BTreeMap;

use crate::index::{Paragraph, Retriever, ScoredDoc};
use crate::llm::{render_prompt, LlmError, TemplateId};

fn truncate_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((byte, _)) => &text[..byte],
        None => text,
    }
}

/// `[doc_id] title: text`, with the text cut to `budget` characters.
pub fn render_doc(p: &Paragraph, budget: usize) -> String {
    format!("[{}] {}: {}", p.doc_id, p.title, truncate_chars(&p.text, budget))
}

/// One rendered document per line; ids the retriever cannot resolve are skipped.
pub(crate) fn render_docs(retriever: &dyn Retriever, docs: &[ScoredDoc], budget: usize) -> String {
    docs.iter()
        .filter_map(|d| retriever.paragraph(&d.doc_id))
        .map(|p| render_doc(p, budget))
        .collect::<Vec<_>>()
        .join("\n")
}

/// `- [surface]: evidence` bullets, one per line, in the given order.
pub fn render_evidence<'a, I>(items: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    items
        .into_iter()
        .map(|(surface, text)| format!("- [{surface}]: {text}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders `template`; if the result exceeds `ceiling` characters, the tail of
/// the `shrink` binding is cut until it fits. Returns the prompt and whether
/// anything was cut.
pub(crate) fn fit_prompt(
    template: TemplateId,
    mut bindings: BTreeMap<&str, String>,
    shrink: &str,
    ceiling: usize,
) -> Result<(String, bool), LlmError> {
    let prompt = render_prompt(template, &bindings)?;
    let len = prompt.chars().count();
    if len <= ceiling {
        return Ok((prompt, false));
    }
    let over = len - ceiling;
    if let Some(value) = bindings.get_mut(shrink) {
        let keep = value.chars().count().saturating_sub(over);
        *value = truncate_chars(value, keep).to_string();
    }
    let prompt = render_prompt(template, &bindings)?;
    // Only if the fixed template text alone is over the ceiling.
    let prompt = truncate_chars(&prompt, ceiling).to_string();
    Ok((prompt, true))
}
