use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{ChatProvider, Completion, CompletionRequest, LlmError, Usage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 4,
            base_delay_ms: 500,
            max_delay_ms: 16_000,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (0-based): base * 2^attempt, capped.
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u64.checked_shl(attempt.min(32)).unwrap_or(u64::MAX);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor).min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Full chat-completions URL, e.g. `https://api.openai.com/v1/chat/completions`.
    pub endpoint: String,
    #[serde(default)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_concurrency")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_timeout() -> u64 {
    60_000
}

fn default_concurrency() -> usize {
    4
}

impl HttpConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpConfig {
            endpoint: endpoint.into(),
            api_key: None,
            timeout_ms: default_timeout(),
            max_in_flight: default_concurrency(),
            retry: RetryPolicy::default(),
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Limiter {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// OpenAI-compatible chat-completions client.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff; any other non-2xx status fails immediately.
pub struct HttpProvider {
    config: HttpConfig,
    agent: ureq::Agent,
    limiter: Limiter,
}

impl HttpProvider {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let limiter = Limiter::new(config.max_in_flight);
        HttpProvider {
            config,
            agent,
            limiter,
        }
    }

    fn send_once(&self, body: &ChatRequest<'_>) -> Result<ChatResponse, Attempt> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp
                .into_json::<ChatResponse>()
                .map_err(|e| Attempt::Fatal(LlmError::BadResponse(e.to_string()))),
            Err(ureq::Error::Status(status, resp)) => {
                let message = resp.into_string().unwrap_or_default();
                if status == 429 || status >= 500 {
                    Err(Attempt::Transient(format!("status {status}: {message}")))
                } else {
                    Err(Attempt::Fatal(LlmError::Provider { status, message }))
                }
            }
            Err(ureq::Error::Transport(t)) => Err(Attempt::Transient(t.to_string())),
        }
    }
}

enum Attempt {
    Transient(String),
    Fatal(LlmError),
}

impl ChatProvider for HttpProvider {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let _permit = self.limiter.acquire();
        let body = ChatRequest {
            model: &request.params.model,
            messages: [Message {
                role: "user",
                content: request.prompt,
            }],
            temperature: request.params.temperature,
            max_tokens: request.params.max_tokens,
        };
        let retry = &self.config.retry;
        let mut last = String::new();
        for attempt in 0..=retry.max_retries {
            if attempt > 0 {
                thread::sleep(retry.delay(attempt - 1));
            }
            let started = Instant::now();
            match self.send_once(&body) {
                Ok(resp) => {
                    let text = resp
                        .choices
                        .into_iter()
                        .next()
                        .and_then(|c| c.message.content)
                        .ok_or_else(|| LlmError::BadResponse("no choices[0].message.content".into()))?;
                    let usage = match resp.usage {
                        Some(u) => Usage {
                            prompt_tokens: u.prompt_tokens,
                            completion_tokens: u.completion_tokens,
                            estimated: false,
                        },
                        None => Usage::estimate(request.prompt, &text),
                    };
                    return Ok(Completion {
                        text,
                        usage,
                        provider: self.id().to_string(),
                        model: request.params.model.clone(),
                        latency_ms: started.elapsed().as_millis() as u64,
                    });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Transient(msg)) => last = msg,
            }
        }
        Err(LlmError::RetriesExhausted {
            attempts: retry.max_retries + 1,
            last,
        })
    }
}
