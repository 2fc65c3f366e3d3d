//! Core of `bmcfix`: drive a bounded model checker over C sources, turn its
//! counterexamples into model prompts, and iterate candidate fixes until the
//! checker accepts one.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`verifier`] runs the checker and parses its output.
//! - [`llm`] holds chat threads and the completion backends (HTTP, replay, scripted).
//! - [`prompts`] is the template catalog and the system-message linter.
//! - [`repair`] is the generate / extract / verify loop and the compile gate.
//! - [`triage`] bins corpus outcomes into the S/U/B/O partition.
//! - [`genbench`] generates sample corpora and drives them to compilability.
//! - [`transcript`] persists session events as JSONL.

pub mod genbench;
pub mod llm;
pub mod prompts;
pub mod repair;
pub mod transcript;
pub mod triage;
pub mod verifier;

pub use llm::{ChatThread, CompletionBackend, LlmError, Message, Role, ThreadFactory};
pub use prompts::{Catalog, PromptTemplate};
pub use repair::{extract_code, RepairResult, RepairStatus};
pub use triage::{classify, CorpusReport, TriageCategory};
pub use verifier::{
    Counterexample, EsbmcVerifier, FlagProfile, VerificationOutcome, Verifier, VerifierConfig,
    ViolatedProperty,
};
