//! Chat message stacks and the completion backends behind them.

mod backend;
mod cache;
mod http;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::estimate_tokens;

pub use backend::{Capabilities, CompletionBackend, CompletionRequest, ScriptedBackend};
pub use cache::{cache_key, CacheKey, CacheRecord, CachingBackend, ReplayBackend, ReplayCache};
pub use http::{HttpBackend, RetryPolicy, Secret};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("prompt must not be empty")]
    EmptyPrompt,
    #[error("{role} message must not be empty")]
    EmptyMessage { role: Role },
    #[error("system messages must precede all other messages")]
    SystemAfterConversation,
    #[error("temperature {0} outside [0, 2]")]
    Temperature(f64),
    #[error("transport failure after {attempts} attempt(s){}: {detail}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        attempts: u32,
        status: Option<u16>,
        detail: String,
    },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("unscripted prompt: no recorded response for key {key}")]
    Unscripted { key: String },
    #[error("context too large: ~{estimated} tokens exceeds budget of {budget}")]
    ContextOverflow { estimated: usize, budget: usize },
    #[error("completion cache I/O: {0}")]
    Cache(#[from] std::io::Error),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    /// Tag byte used in cache-key serialisation.
    pub(crate) fn tag(self) -> u8 {
        match self {
            Role::System => b's',
            Role::User => b'u',
            Role::Assistant => b'a',
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Result<Self, LlmError> {
        let content = content.into();
        if content.is_empty() {
            return Err(LlmError::EmptyMessage { role });
        }
        Ok(Message { role, content })
    }

    pub fn system(content: impl Into<String>) -> Result<Self, LlmError> {
        Message::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Result<Self, LlmError> {
        Message::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Result<Self, LlmError> {
        Message::new(Role::Assistant, content)
    }
}

/// An append-only message stack bound to a model, a temperature and a backend.
///
/// System messages form a contiguous prefix. Nothing is ever removed or
/// reordered; a failed completion leaves the stack untouched.
#[derive(Clone)]
pub struct ChatThread {
    messages: Vec<Message>,
    model_id: String,
    temperature: f64,
    backend: Arc<dyn CompletionBackend>,
    token_budget: Option<usize>,
}

impl fmt::Debug for ChatThread {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChatThread")
            .field("model_id", &self.model_id)
            .field("temperature", &self.temperature)
            .field("backend", &self.backend.name())
            .field("messages", &self.messages.len())
            .finish()
    }
}

impl ChatThread {
    pub fn new(
        backend: Arc<dyn CompletionBackend>,
        model_id: impl Into<String>,
        temperature: f64,
    ) -> Result<Self, LlmError> {
        if !(0.0..=2.0).contains(&temperature) {
            return Err(LlmError::Temperature(temperature));
        }
        Ok(ChatThread {
            messages: Vec::new(),
            model_id: model_id.into(),
            temperature,
            backend,
            token_budget: None,
        })
    }

    /// Fail any completion whose estimated prompt size exceeds `budget` tokens.
    pub fn with_token_budget(mut self, budget: Option<usize>) -> Self {
        self.token_budget = budget;
        self
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn into_messages(self) -> Vec<Message> {
        self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn backend(&self) -> &Arc<dyn CompletionBackend> {
        &self.backend
    }

    pub fn push_system(&mut self, content: impl Into<String>) -> Result<(), LlmError> {
        if self.messages.iter().any(|m| m.role != Role::System) {
            return Err(LlmError::SystemAfterConversation);
        }
        self.messages.push(Message::system(content)?);
        Ok(())
    }

    /// Append a user message without asking for a reply.
    pub fn push_user(&mut self, content: impl Into<String>) -> Result<(), LlmError> {
        let content = content.into();
        if content.is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        self.messages.push(Message::user(content)?);
        Ok(())
    }

    /// Request a completion for the current stack and append the reply.
    pub fn generate(&mut self) -> Result<Message, LlmError> {
        let reply = self.complete_with(&self.messages)?;
        self.messages.push(reply.clone());
        Ok(reply)
    }

    /// Append `prompt` as a user message, complete, append the reply.
    /// The stack grows by exactly two on success and is unchanged on error.
    pub fn send(&mut self, prompt: &str) -> Result<Message, LlmError> {
        if prompt.is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        let mut stack = self.messages.clone();
        stack.push(Message::user(prompt)?);
        let reply = self.complete_with(&stack)?;
        stack.push(reply.clone());
        self.messages = stack;
        Ok(reply)
    }

    fn complete_with(&self, stack: &[Message]) -> Result<Message, LlmError> {
        if let Some(budget) = self.token_budget {
            let estimated: usize = stack.iter().map(|m| estimate_tokens(&m.content)).sum();
            if estimated > budget {
                return Err(LlmError::ContextOverflow { estimated, budget });
            }
        }
        let request = CompletionRequest {
            model_id: &self.model_id,
            temperature: self.temperature,
            messages: stack,
        };
        let text = self.backend.complete(&request)?;
        Message::assistant(text)
            .map_err(|_| LlmError::Protocol("model returned an empty message".to_string()))
    }
}

/// Builds fresh, empty threads sharing one backend configuration.
#[derive(Clone)]
pub struct ThreadFactory {
    pub backend: Arc<dyn CompletionBackend>,
    pub model_id: String,
    pub temperature: f64,
    pub token_budget: Option<usize>,
}

impl fmt::Debug for ThreadFactory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThreadFactory")
            .field("backend", &self.backend.name())
            .field("model_id", &self.model_id)
            .field("temperature", &self.temperature)
            .field("token_budget", &self.token_budget)
            .finish()
    }
}

impl ThreadFactory {
    pub fn new(
        backend: Arc<dyn CompletionBackend>,
        model_id: impl Into<String>,
        temperature: f64,
    ) -> Self {
        ThreadFactory {
            backend,
            model_id: model_id.into(),
            temperature,
            token_budget: None,
        }
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        ThreadFactory {
            temperature,
            ..self.clone()
        }
    }

    pub fn thread(&self) -> Result<ChatThread, LlmError> {
        Ok(ChatThread::new(
            self.backend.clone(),
            self.model_id.clone(),
            self.temperature,
        )?
        .with_token_budget(self.token_budget))
    }
}
