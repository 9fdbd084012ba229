//! Chat-completion access for the pipeline.
//!
//! Prompts come from [`PromptTemplate`]s, go through a [`ChatProvider`]
//! (an OpenAI-compatible HTTP endpoint or a scripted [`MockProvider`]), and
//! every call is recorded as a [`LedgerEntry`] for cost accounting.

mod cost;
mod http;
mod mock;
mod parse;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::NodeId;

pub use cost::{cost_report, CostError, CostItem, CostReport, CostRow, PricingTable, Rate, TokenCost};
pub use http::{HttpConfig, HttpProvider, RetryPolicy};
pub use mock::{fallback_key, prompt_key, MockProvider, RecordingProvider, TranscriptEntry};
pub use parse::{parse_final, ParsedFinal};
pub use template::{render_prompt, PromptTemplate, TemplateId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("template {template} has no binding for {{{{{name}}}}}")]
    MissingBinding { template: TemplateId, name: String },
    #[error("provider returned status {status}: {message}")]
    Provider { status: u16, message: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("no transcript entry for prompt {key} (fallback {fallback:?})")]
    TranscriptMiss { key: String, fallback: Option<String> },
    #[error("malformed provider response: {0}")]
    BadResponse(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_max_tokens() -> u32 {
    1024
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Counts were estimated because the provider did not report them.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub estimated: bool,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn estimate(prompt: &str, completion: &str) -> Self {
        Usage {
            prompt_tokens: estimate_tokens(prompt),
            completion_tokens: estimate_tokens(completion),
            estimated: true,
        }
    }
}

/// Whitespace tokens times 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> u64 {
    let words = text.split_whitespace().count() as u64;
    (words * 13).div_ceil(10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub provider: String,
    pub model: String,
    pub latency_ms: u64,
}

/// One call to the model.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub params: &'a ModelParams,
    /// Template the prompt was rendered from; part of the mock fallback key.
    pub template: Option<TemplateId>,
    /// Node surface (or the question) the call is about; the other half of
    /// the mock fallback key.
    pub anchor: Option<&'a str>,
}

pub trait ChatProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, LlmError>;
}

/// Pipeline stage that issued a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Qg,
    Sag,
    Fag,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Qg => "qg",
            Stage::Sag => "sag",
            Stage::Fag => "fag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    pub template: TemplateId,
    pub provider: String,
    pub model: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

/// Provider plus default sampling parameters. Cheap to share across threads.
pub struct Gateway {
    provider: Box<dyn ChatProvider>,
    params: ModelParams,
}

impl Gateway {
    pub fn new(provider: Box<dyn ChatProvider>, params: ModelParams) -> Self {
        Gateway { provider, params }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn provider_id(&self) -> &str {
        self.provider.id()
    }

    /// Sends a prompt rendered from `template` and appends the usage to `ledger`.
    pub fn call(
        &self,
        stage: Stage,
        node: Option<NodeId>,
        template: TemplateId,
        prompt: &str,
        anchor: &str,
        ledger: &mut Vec<LedgerEntry>,
    ) -> Result<Completion, LlmError> {
        let request = CompletionRequest {
            prompt,
            params: &self.params,
            template: Some(template),
            anchor: Some(anchor),
        };
        let completion = self.provider.complete(&request)?;
        ledger.push(LedgerEntry {
            stage,
            node,
            template,
            provider: completion.provider.clone(),
            model: completion.model.clone(),
            usage: completion.usage,
            latency_ms: completion.latency_ms,
        });
        Ok(completion)
    }
}
