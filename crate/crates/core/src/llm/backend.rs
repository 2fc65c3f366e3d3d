use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{cache_key, LlmError, Message};

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub model_id: &'a str,
    pub temperature: f64,
    pub messages: &'a [Message],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    /// Talks to a real model over the network.
    pub live: bool,
    /// Referentially transparent: equal cache keys give equal responses.
    pub deterministic: bool,
}

/// A source of chat completions.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError>;

    fn capabilities(&self) -> Capabilities;

    fn name(&self) -> &str;
}

/// Hands out canned responses in order, regardless of the prompt.
///
/// Running out of responses is an [`LlmError::Unscripted`] error.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(responses: impl IntoIterator<Item = String>) -> Self {
        ScriptedBackend {
            responses: Mutex::new(responses.into_iter().collect()),
            calls: AtomicUsize::new(0),
        }
    }

    /// Load a JSON array of response strings.
    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path)?;
        let responses: Vec<String> = serde_json::from_str(&text).map_err(|e| {
            LlmError::Protocol(format!(
                "script {} is not a JSON array of strings: {e}",
                path.display()
            ))
        })?;
        Ok(ScriptedBackend::new(responses))
    }

    /// Completion requests served or refused so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("script lock").len()
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.responses
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| LlmError::Unscripted {
                key: cache_key(request.model_id, request.temperature, request.messages).to_string(),
            })
    }

    fn capabilities(&self) -> Capabilities {
        // replies depend on call order, not on the request
        Capabilities {
            live: false,
            deterministic: false,
        }
    }

    fn name(&self) -> &str {
        "scripted"
    }
}
