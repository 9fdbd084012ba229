use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatProvider, Completion, CompletionRequest, LlmError, TemplateId, Usage};
use crate::index::hex;

/// One line of a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub key: String,
    pub response_text: String,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

/// SHA-256 of the rendered prompt, hex encoded.
pub fn prompt_key(prompt: &str) -> String {
    hex(&Sha256::digest(prompt.as_bytes()))
}

/// Key used when the exact prompt is not in the transcript: the template id
/// and the node surface it was rendered for, e.g. `sag::film starring X`.
pub fn fallback_key(template: TemplateId, anchor: &str) -> String {
    format!("{}::{}", template.as_str(), anchor)
}

/// Replays scripted completions. Lookup tries the prompt hash first, then the
/// `(template, anchor)` fallback key. Read-only after construction.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    entries: HashMap<String, TranscriptEntry>,
}

impl MockProvider {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        MockProvider {
            entries: entries.into_iter().map(|e| (e.key.clone(), e)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let file = File::open(path).map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| LlmError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line)
                .map_err(|e| LlmError::Io(format!("{} line {}: {e}", path.display(), i + 1)))?;
            entries.push(entry);
        }
        Ok(MockProvider::new(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, request: &CompletionRequest<'_>) -> Result<&TranscriptEntry, LlmError> {
        let key = prompt_key(request.prompt);
        if let Some(e) = self.entries.get(&key) {
            return Ok(e);
        }
        let fallback = match (request.template, request.anchor) {
            (Some(t), Some(a)) => Some(fallback_key(t, a)),
            _ => None,
        };
        if let Some(e) = fallback.as_ref().and_then(|k| self.entries.get(k)) {
            return Ok(e);
        }
        Err(LlmError::TranscriptMiss { key, fallback })
    }
}

impl ChatProvider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let entry = self.lookup(request)?;
        Ok(Completion {
            text: entry.response_text.clone(),
            usage: Usage {
                prompt_tokens: entry.prompt_tokens,
                completion_tokens: entry.completion_tokens,
                estimated: false,
            },
            provider: self.id().to_string(),
            model: request.params.model.clone(),
            latency_ms: 0,
        })
    }
}

/// Wraps a live provider and appends every completion to a transcript file,
/// keyed by prompt hash, so a run can later be replayed with [`MockProvider`].
pub struct RecordingProvider<P> {
    inner: P,
    out: Mutex<File>,
}

impl<P: ChatProvider> RecordingProvider<P> {
    pub fn new(inner: P, path: &Path) -> Result<Self, LlmError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Io(format!("{}: {e}", path.display())))?;
        Ok(RecordingProvider {
            inner,
            out: Mutex::new(out),
        })
    }
}

impl<P: ChatProvider> ChatProvider for RecordingProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let completion = self.inner.complete(request)?;
        let entry = TranscriptEntry {
            key: prompt_key(request.prompt),
            response_text: completion.text.clone(),
            prompt_tokens: completion.usage.prompt_tokens,
            completion_tokens: completion.usage.completion_tokens,
        };
        let line = serde_json::to_string(&entry).map_err(|e| LlmError::Io(e.to_string()))?;
        let mut out = self.out.lock().unwrap();
        writeln!(out, "{line}").map_err(|e| LlmError::Io(e.to_string()))?;
        Ok(completion)
    }
}
