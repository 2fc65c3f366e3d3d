//! Solution generation: ask the model for a fix, pull the code out of the
//! reply, check it, feed the checker's complaint back, repeat.

mod compile;
mod extract;
mod fix;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{LlmError, Message};
use crate::prompts::PromptError;
use crate::verifier::{RenderMode, VerifierError};

pub use compile::{compile_gate, CompileError, CompileResult, Compiler};
pub use extract::{extract_code, KNOWN_LANGUAGE_TAGS};
pub use fix::{fix_code, repair_compilation};

pub const DEFAULT_MAX_ATTEMPTS: usize = 10;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("repair needs a falsified program, but the initial verdict was {0}")]
    NotFalsified(&'static str),
    #[error("max_attempts must be at least 1")]
    ZeroAttempts,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("repair session I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStatus {
    Fixed,
    Exhausted,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairAttempt<O> {
    /// 1-based.
    pub index: usize,
    pub raw_response: String,
    pub extracted_code: String,
    pub outcome: O,
    #[serde(skip)]
    pub duration: Duration,
}

#[derive(Debug, Clone)]
pub struct RepairResult<O> {
    pub status: RepairStatus,
    pub attempts: Vec<RepairAttempt<O>>,
    /// Set iff `status == Fixed`.
    pub final_code: Option<String>,
    /// The generator thread as it stood when the loop ended.
    pub messages: Vec<Message>,
    /// Candidate files, kept when the loop did not succeed or when asked to.
    pub artifacts_dir: Option<PathBuf>,
    pub abort_reason: Option<String>,
}

impl<O> RepairResult<O> {
    pub fn is_fixed(&self) -> bool {
        self.status == RepairStatus::Fixed
    }
}

#[derive(Debug, Clone)]
pub struct FixOptions {
    pub max_attempts: usize,
    /// Rendering of checker feedback, for the first prompt and every retry.
    pub feedback: RenderMode,
    /// Where session dirs are created; system temp dir when `None`.
    pub session_parent: Option<PathBuf>,
    pub keep_artifacts: bool,
}

impl Default for FixOptions {
    fn default() -> Self {
        FixOptions {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            feedback: RenderMode::FullTrace,
            session_parent: None,
            keep_artifacts: false,
        }
    }
}

/// Hooks called as the loop progresses, in order.
pub trait RepairObserver<O> {
    fn message(&mut self, _message: &Message) {}
    fn attempt(&mut self, _attempt: &RepairAttempt<O>) {}
}

/// Observer that ignores everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl<O> RepairObserver<O> for NoObserver {}
