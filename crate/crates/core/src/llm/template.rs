use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    QgMultihop,
    QgAmbiguous,
    Sag,
    FagMultihop,
    FagAmbiguous,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::QgMultihop,
        TemplateId::QgAmbiguous,
        TemplateId::Sag,
        TemplateId::FagMultihop,
        TemplateId::FagAmbiguous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::QgMultihop => "qg_multihop",
            TemplateId::QgAmbiguous => "qg_ambiguous",
            TemplateId::Sag => "sag",
            TemplateId::FagMultihop => "fag_multihop",
            TemplateId::FagAmbiguous => "fag_ambiguous",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template id {s:?}"))
    }
}

const QG_MULTIHOP: &str = r#"You're a multi-hop reasoning expert analyzing "{{phrase}}" in:
{{question}}
Instruction:
1. Identify the entities, relations and constraints that "{{phrase}}" contributes to the question.
2. Decide which facts about them are still unknown given what we currently know, including facts that only emerge when the parts of the phrase are combined.
3. Write short, self-contained search questions that would resolve those unknown facts. Replace references with the concrete names found in the documents whenever possible.

Here is what we currently know
Documents:{{context}}

pick top 5 questions that are best in resolving the phrase (cover different missing facts) and strictly FOLLOW the format: response: question1; question2;...."#;

const QG_AMBIGUOUS: &str = r#"You're a disambiguation expert analyzing "{{phrase}}" in:
{{question}}
Instruction:
1. Analyze the question by considering these potential ambiguities:
   - Temporal: Check for unclear time references, periods, or temporal scope
   - Entity: Identify names, references, or terms that could refer to multiple entities
   - Semantic: Look for words with multiple meanings (polysemy/homonymy)
   - Scope: Consider possible boundaries and levels of detail
   - Intent: Examine possible purposes and expected answer types
   - Cultural: Consider cultural-dependent interpretations
   - Quantitative: Check for unclear measurements or numerical references
   - Linguistic: Analyze syntax and referential clarity
   - Categorical: Consider possible classification schemes
   - Contextual: Examine required background knowledge and relationships
2. Analyze the question word by word. Return disambiguated question and its interperatation for each different meaning

Here is what we currently know
Documents:{{context}}

pick top 5 questions that are best in disambiguating the question. (covers different meanings of the questions) and strictly FOLLOW the format: response: question1; question2;...."#;

const SAG: &str = r#"Answer the {{question}} based on on the document info. For each question find as many answers as possible. Response all the answers in a short paragraph (as specific as possible).
Relevant Document: {{context}}"#;

const FAG_MULTIHOP: &str = r#"Answer the following question: {{question}} ,
with following documents: {{documents}}.
Your response should strictly follow the format:
Explanations :[give your step by step Analysis here ]

FINAL:(BE CONCISE, ONLY a FEW phrases)

let's think step by step"#;

const FAG_AMBIGUOUS: &str = r#"The question may be ambiguous and have multiple correct answers, and in that case, you have to provide a long-form answer including all correct answers.
1. Carefully go through all the given documents.
2.The using your and context, provide answer.
Your response should strictly follow the format:
Explanations (Step 2):[give your step by step Analysis here ]
FINAL(Step 2):
Please ONLY reply according to this format
Question: {{question}}
Document: {{documents}}
let's think step by step"#;

/// A prompt body with `{{name}}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(id: TemplateId) -> Self {
        let body = match id {
            TemplateId::QgMultihop => QG_MULTIHOP,
            TemplateId::QgAmbiguous => QG_AMBIGUOUS,
            TemplateId::Sag => SAG,
            TemplateId::FagMultihop => FAG_MULTIHOP,
            TemplateId::FagAmbiguous => FAG_AMBIGUOUS,
        };
        PromptTemplate {
            template_id: id,
            body: body.to_string(),
        }
    }

    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (_, name, _) in Placeholders::new(&self.body) {
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    /// Substitutes every placeholder in one left-to-right pass, so bound
    /// values are inserted verbatim and never re-scanned.
    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, LlmError> {
        let mut out = String::with_capacity(self.body.len());
        let mut last = 0;
        for (start, name, end) in Placeholders::new(&self.body) {
            let value = bindings.get(name).ok_or_else(|| LlmError::MissingBinding {
                template: self.template_id,
                name: name.to_string(),
            })?;
            out.push_str(&self.body[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

/// Renders one of the built-in templates.
pub fn render_prompt(id: TemplateId, bindings: &BTreeMap<&str, String>) -> Result<String, LlmError> {
    PromptTemplate::builtin(id).render(bindings)
}

/// Yields `(start, name, end)` for each `{{name}}` in a body.
struct Placeholders<'a> {
    body: &'a str,
    pos: usize,
}

impl<'a> Placeholders<'a> {
    fn new(body: &'a str) -> Self {
        Placeholders { body, pos: 0 }
    }
}

impl<'a> Iterator for Placeholders<'a> {
    type Item = (usize, &'a str, usize);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let rel = self.body[self.pos..].find("{{")?;
            let start = self.pos + rel;
            let close = self.body[start + 2..].find("}}")?;
            let name = &self.body[start + 2..start + 2 + close];
            let end = start + 2 + close + 2;
            if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos = end;
                return Some((start, name, end));
            }
            self.pos = start + 2;
        }
    }
}
