use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Capabilities, CompletionBackend, CompletionRequest, LlmError, Message, Role};

const BODY_SNIPPET: usize = 300;

/// A credential. Never printed, never serialised.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

/// Exponential backoff on transport failures: retry `max_retries` times,
/// sleeping `base_delay * 2^i` before retry `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        self.base_delay.saturating_mul(1u32 << retry.min(16))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: Role,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    content: Option<String>,
}

/// Client for the chat-completions wire protocol:
/// `POST {model, temperature, messages}` → `{choices: [{message: {role, content}}]}`.
pub struct HttpBackend {
    endpoint: String,
    credentials: Secret,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("credentials", &self.credentials)
            .field("retry", &self.retry)
            .finish()
    }
}

enum Failure {
    Retryable(Option<u16>, String),
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, credentials: Secret) -> Self {
        HttpBackend {
            endpoint: endpoint.into(),
            credentials,
            retry: RetryPolicy::default(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(120))
                .build(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<String, Failure> {
        let response = self
            .agent
            .post(&self.endpoint)
            .set(
                "Authorization",
                &format!("Bearer {}", self.credentials.expose()),
            )
            .send_json(body);
        let response = match response {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                let snippet: String = r
                    .into_string()
                    .unwrap_or_default()
                    .chars()
                    .take(BODY_SNIPPET)
                    .collect();
                let retryable = code == 429 || code >= 500;
                return Err(if retryable {
                    Failure::Retryable(Some(code), snippet)
                } else {
                    Failure::Fatal(LlmError::Transport {
                        attempts: 0,
                        status: Some(code),
                        detail: snippet,
                    })
                });
            }
            Err(ureq::Error::Transport(t)) => return Err(Failure::Retryable(None, t.to_string())),
        };
        let text = response
            .into_string()
            .map_err(|e| Failure::Retryable(None, e.to_string()))?;
        let parsed: WireResponse = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(LlmError::Protocol(format!("invalid JSON: {e}"))))?;
        let choice =
            parsed.choices.into_iter().next().ok_or_else(|| {
                Failure::Fatal(LlmError::Protocol("response has no choices".into()))
            })?;
        choice
            .message
            .content
            .ok_or_else(|| Failure::Fatal(LlmError::Protocol("first choice has no content".into())))
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let body = WireRequest {
            model: request.model_id,
            temperature: request.temperature,
            messages: request
                .messages
                .iter()
                .map(|m: &Message| WireMessage {
                    role: m.role,
                    content: &m.content,
                })
                .collect(),
        };
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(LlmError::Transport { status, detail, .. })) => {
                    return Err(LlmError::Transport {
                        attempts,
                        status,
                        detail,
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(status, detail)) => {
                    let retry = attempts - 1;
                    if retry >= self.retry.max_retries {
                        return Err(LlmError::Transport {
                            attempts,
                            status,
                            detail,
                        });
                    }
                    thread::sleep(self.retry.delay(retry));
                }
            }
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            live: true,
            deterministic: false,
        }
    }

    fn name(&self) -> &str {
        "live"
    }
}
