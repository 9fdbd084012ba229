//! The `--config` TOML file for `treerare run`.
//!
//! ```toml
//! min_success_fraction = 1.0
//!
//! [pipeline]              # any PipelineConfig field; omitted ones keep defaults
//! qa_style = "multihop"
//!
//! [llm]
//! provider = "mock"       # or "http"
//! transcript = "transcript.jsonl"
//! model = "gpt-4o-mini"
//!
//! [reranker]              # only used by tree-retrieval; passthrough if absent
//! url = "http://localhost:8081/score"
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use treerare::index::{HttpScorer, PassthroughScorer, RelevanceScorer};
use treerare::llm::{
    ChatProvider, Gateway, HttpConfig, HttpProvider, MockProvider, ModelParams, RecordingProvider, RetryPolicy,
};
use treerare::pipeline::PipelineConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub pipeline: PipelineConfig,
    pub llm: LlmConfig,
    #[serde(default)]
    pub reranker: Option<RerankerConfig>,
    /// `run` exits 0 only if at least this share of attempted questions
    /// produced a trace without a fatal error.
    #[serde(default = "one")]
    pub min_success_fraction: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: ProviderKind,
    /// Mock: transcript to replay.
    #[serde(default)]
    pub transcript: Option<PathBuf>,
    /// Http: chat-completions URL.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Http: name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Append every live completion to this transcript for later replay.
    #[serde(default)]
    pub record: Option<PathBuf>,
}

fn default_model() -> String {
    ModelParams::default().model
}

fn default_max_tokens() -> u32 {
    ModelParams::default().max_tokens
}

fn default_timeout() -> u64 {
    60_000
}

fn default_in_flight() -> usize {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankerConfig {
    /// `POST {anchor, passages[]} -> {scores[]}` endpoint.
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut cfg.llm.transcript);
        resolve(&mut cfg.llm.record);
        cfg.pipeline.validate()?;
        if !(0.0..=1.0).contains(&cfg.min_success_fraction) {
            bail!("min_success_fraction must be within [0, 1]");
        }
        match cfg.llm.provider {
            ProviderKind::Mock if cfg.llm.transcript.is_none() => bail!("llm.provider = \"mock\" needs llm.transcript"),
            ProviderKind::Http if cfg.llm.endpoint.is_none() => bail!("llm.provider = \"http\" needs llm.endpoint"),
            _ => {}
        }
        Ok(cfg)
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            model: self.llm.model.clone(),
            temperature: self.llm.temperature,
            max_tokens: self.llm.max_tokens,
        }
    }

    /// Builds the gateway; a missing transcript or API key is an input error.
    pub fn gateway(&self) -> anyhow::Result<Gateway> {
        let provider: Box<dyn ChatProvider> = match self.llm.provider {
            ProviderKind::Mock => {
                let path = self.llm.transcript.as_ref().expect("checked on load");
                Box::new(MockProvider::load(path)?)
            }
            ProviderKind::Http => {
                let mut http = HttpConfig::new(self.llm.endpoint.clone().expect("checked on load"));
                if let Some(var) = &self.llm.api_key_env {
                    http.api_key =
                        Some(std::env::var(var).with_context(|| format!("API key variable {var} is not set"))?);
                }
                http.timeout_ms = self.llm.timeout_ms;
                http.max_in_flight = self.llm.max_in_flight;
                http.retry = self.llm.retry.clone();
                let live = HttpProvider::new(http);
                match &self.llm.record {
                    Some(path) => Box::new(RecordingProvider::new(live, path)?),
                    None => Box::new(live),
                }
            }
        };
        Ok(Gateway::new(provider, self.model_params()))
    }

    pub fn scorer(&self) -> Box<dyn RelevanceScorer> {
        match &self.reranker {
            Some(r) => Box::new(HttpScorer::new(r.url.clone(), Duration::from_millis(r.timeout_ms))),
            None => Box::new(PassthroughScorer),
        }
    }
}
