//! `bmcfix` command-line front end.
//!
//! The binary is a thin clap wrapper around this library so that whole
//! sessions (chat, fix, triage) can be driven in-process by tests with
//! scripted input and stub backends.

pub mod chat;
pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use bmcfix_core::llm::{CachingBackend, HttpBackend, ReplayBackend, ReplayCache, ScriptedBackend};
use bmcfix_core::repair::{RepairAttempt, RepairObserver};
use bmcfix_core::transcript::{EventKind, SessionTranscript, TranscriptError};
use bmcfix_core::verifier::{EsbmcVerifier, VerificationOutcome};
use bmcfix_core::{Catalog, CompletionBackend, Message, ThreadFactory};
use serde_json::json;
use thiserror::Error;

pub use chat::chat_repl;
pub use commands::{cmd_fix, cmd_gen, cmd_report, cmd_triage, fixed_path, FixFlags, TriageFlags};
pub use config::{load_config, AppConfig, Overrides};

/// Process exit statuses.
pub mod exit {
    /// Verified, fixed, or nothing to fix.
    pub const OK: i32 = 0;
    /// Inconclusive verdict, aborted repair, or a runtime failure.
    pub const INCONCLUSIVE: i32 = 1;
    /// The repair loop used every attempt without a verified fix.
    pub const EXHAUSTED: i32 = 2;
    pub const CONFIG: i32 = 64;
    pub const NO_INPUT: i32 = 66;
    pub const UNAVAILABLE: i32 = 69;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    NoInput(String),
    #[error("{0}")]
    VerifierUnavailable(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::NoInput(_) => exit::NO_INPUT,
            CliError::VerifierUnavailable(_) => exit::UNAVAILABLE,
            CliError::Runtime(_) => exit::INCONCLUSIVE,
        }
    }
}

impl From<TranscriptError> for CliError {
    fn from(e: TranscriptError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// `--backend` selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Live,
    Replay,
    Scripted(PathBuf),
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(BackendChoice::Live),
            "replay" => Ok(BackendChoice::Replay),
            _ => match s.strip_prefix("scripted:") {
                Some(path) if !path.is_empty() => Ok(BackendChoice::Scripted(path.into())),
                _ => Err(format!(
                    "unknown backend `{s}` (expected live, replay or scripted:PATH)"
                )),
            },
        }
    }
}

/// Build the completion backend. The live backend records into the replay
/// cache when `cache_path` is set.
pub fn build_backend(
    choice: &BackendChoice,
    cfg: &AppConfig,
) -> Result<Arc<dyn CompletionBackend>, CliError> {
    let config_err = |e: bmcfix_core::LlmError| CliError::Config(e.to_string());
    Ok(match choice {
        BackendChoice::Live => {
            let http = HttpBackend::new(cfg.endpoint.clone(), cfg.api_key()?.clone());
            match &cfg.cache_path {
                Some(path) => Arc::new(CachingBackend::new(
                    Arc::new(http),
                    ReplayCache::open(path).map_err(config_err)?,
                )),
                None => Arc::new(http),
            }
        }
        BackendChoice::Replay => {
            let path = cfg.cache_path.as_ref().ok_or_else(|| {
                CliError::Config("the replay backend needs `cache_path` or --cache".into())
            })?;
            Arc::new(ReplayBackend::from_file(path).map_err(config_err)?)
        }
        BackendChoice::Scripted(path) => {
            Arc::new(ScriptedBackend::from_file(path).map_err(config_err)?)
        }
    })
}

/// Everything a command needs besides the verifier.
pub struct Session {
    pub config: AppConfig,
    pub backend: Arc<dyn CompletionBackend>,
    pub catalog: Catalog,
}

impl Session {
    pub fn new(config: AppConfig, backend: Arc<dyn CompletionBackend>) -> Result<Self, CliError> {
        let catalog = match &config.prompt_dir {
            Some(dir) => {
                Catalog::with_overrides(dir).map_err(|e| CliError::Config(e.to_string()))?
            }
            None => Catalog::builtin(),
        };
        Ok(Session {
            config,
            backend,
            catalog,
        })
    }

    pub fn threads(&self, temperature: f64) -> ThreadFactory {
        let mut f = ThreadFactory::new(
            self.backend.clone(),
            self.config.model_id.clone(),
            temperature,
        );
        f.token_budget = self.config.token_budget;
        f
    }

    /// File-backed transcript under `session_dir`, or in-memory without one.
    pub fn transcript(&self) -> Result<SessionTranscript, CliError> {
        Ok(match &self.config.session_dir {
            Some(dir) => SessionTranscript::create(dir)?,
            None => SessionTranscript::in_memory(),
        })
    }
}

/// Locate the checker binary. A bare name is looked up on `PATH`.
pub fn resolve_verifier(cfg: &AppConfig) -> Result<EsbmcVerifier, CliError> {
    let configured = &cfg.verifier.binary_path;
    let unavailable = || {
        CliError::VerifierUnavailable(format!(
            "verifier `{}` not found; install ESBMC or point `verifier.binary` / {} at it",
            configured.display(),
            config::ENV_VERIFIER
        ))
    };
    let resolved = if configured.components().count() > 1 {
        if !configured.is_file() {
            return Err(unavailable());
        }
        configured.clone()
    } else {
        which::which(configured).map_err(|_| unavailable())?
    };
    let mut verifier_cfg = cfg.verifier.clone();
    verifier_cfg.binary_path = resolved;
    EsbmcVerifier::new(verifier_cfg).map_err(|e| CliError::Config(e.to_string()))
}

/// Appends repair-loop events to a transcript. The first write error is
/// kept and reported by [`TranscriptObserver::finish`].
pub struct TranscriptObserver<'a> {
    transcript: &'a mut SessionTranscript,
    mode: &'static str,
    error: Option<TranscriptError>,
}

impl<'a> TranscriptObserver<'a> {
    pub fn new(transcript: &'a mut SessionTranscript, mode: &'static str) -> Self {
        TranscriptObserver {
            transcript,
            mode,
            error: None,
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        self.error.map_or(Ok(()), |e| Err(e.into()))
    }

    fn record(&mut self, kind: EventKind, payload: serde_json::Value) {
        if self.error.is_none() {
            if let Err(e) = self.transcript.append(kind, payload) {
                self.error = Some(e);
            }
        }
    }
}

impl RepairObserver<VerificationOutcome> for TranscriptObserver<'_> {
    fn message(&mut self, message: &Message) {
        self.record(EventKind::Message, message_payload(self.mode, message));
    }

    fn attempt(&mut self, attempt: &RepairAttempt<VerificationOutcome>) {
        self.record(
            EventKind::Attempt,
            json!({
                "mode": self.mode,
                "index": attempt.index,
                "raw_response": attempt.raw_response,
                "extracted_code": attempt.extracted_code,
                "outcome": attempt.outcome,
            }),
        );
    }
}

pub fn message_payload(mode: &str, message: &Message) -> serde_json::Value {
    json!({ "mode": mode, "role": message.role, "content": message.content })
}

pub fn verifier_run_payload(file: &Path, outcome: &VerificationOutcome) -> serde_json::Value {
    json!({ "file": file.display().to_string(), "outcome": outcome })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backend_choice_parsing() {
        assert_eq!(
            "live".parse::<BackendChoice>().unwrap(),
            BackendChoice::Live
        );
        assert_eq!(
            "replay".parse::<BackendChoice>().unwrap(),
            BackendChoice::Replay
        );
        assert_eq!(
            "scripted:a/b.json".parse::<BackendChoice>().unwrap(),
            BackendChoice::Scripted("a/b.json".into())
        );
        assert!("scripted:".parse::<BackendChoice>().is_err());
        assert!("openai".parse::<BackendChoice>().is_err());
    }

    #[test]
    fn live_without_key_is_a_config_error() {
        let err = build_backend(&BackendChoice::Live, &AppConfig::default())
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), exit::CONFIG);
        assert!(err.to_string().contains(config::ENV_API_KEY));
    }

    #[test]
    fn replay_needs_a_cache_path() {
        let err = build_backend(&BackendChoice::Replay, &AppConfig::default())
            .err()
            .unwrap();
        assert_eq!(err.exit_code(), exit::CONFIG);
    }

    #[test]
    fn missing_verifier_is_unavailable() {
        let mut cfg = AppConfig::default();
        cfg.verifier.binary_path = "definitely-not-esbmc-here".into();
        assert_eq!(
            resolve_verifier(&cfg).unwrap_err().exit_code(),
            exit::UNAVAILABLE
        );
        cfg.verifier.binary_path = "/nope/esbmc".into();
        assert_eq!(
            resolve_verifier(&cfg).unwrap_err().exit_code(),
            exit::UNAVAILABLE
        );
    }
}
