//! Bounded model checker driver.
//!
//! The checker is an external binary (ESBMC or anything that prints the same
//! verdict markers). [`run_verifier`] spawns it under a wall-clock watchdog and
//! [`parse_verifier_output`] turns the captured text into a
//! [`VerificationOutcome`].

mod config;
mod parse;
mod run;

use std::fmt;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use config::{ConfigError, FlagProfile, VerifierConfig};
pub use parse::{counterexample_to_prompt_text, parse_verifier_output, RenderMode};
pub use run::{run_verifier, EsbmcVerifier, VerifierError};

pub const MARKER_SUCCESSFUL: &str = "VERIFICATION SUCCESSFUL";
pub const MARKER_FAILED: &str = "VERIFICATION FAILED";
pub const MARKER_UNKNOWN: &str = "VERIFICATION UNKNOWN";
pub const MARKER_VIOLATED: &str = "Violated property:";

/// The property the checker reports as falsified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolatedProperty {
    pub file: String,
    pub line: u32,
    pub function: String,
    /// Free-text violation class, e.g. `buffer overflow on scanf`.
    pub kind: String,
    /// The falsified condition; may span several lines or be empty.
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub violated_property: ViolatedProperty,
    /// One entry per `State N ...` block of the trace, kept as raw text.
    pub state_lines: Vec<String>,
    /// Full checker output, verbatim.
    pub raw_text: String,
}

/// Structured verdict of one checker run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum VerificationOutcome {
    Successful,
    Failed(Counterexample),
    Unknown {
        reason: String,
        raw: String,
    },
    Timeout {
        #[serde(with = "duration_ms")]
        elapsed: Duration,
    },
    ToolError {
        detail: String,
        exit_info: String,
    },
}

impl VerificationOutcome {
    pub fn is_successful(&self) -> bool {
        matches!(self, VerificationOutcome::Successful)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            VerificationOutcome::Failed(cex) => Some(cex),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            VerificationOutcome::Successful => "successful",
            VerificationOutcome::Failed(_) => "failed",
            VerificationOutcome::Unknown { .. } => "unknown",
            VerificationOutcome::Timeout { .. } => "timeout",
            VerificationOutcome::ToolError { .. } => "tool_error",
        }
    }

    /// Text handed to the model when this outcome is fed back into a chat.
    /// Never empty.
    pub fn feedback_text(&self, mode: RenderMode) -> String {
        match self {
            VerificationOutcome::Successful => MARKER_SUCCESSFUL.to_string(),
            VerificationOutcome::Failed(cex) => counterexample_to_prompt_text(cex, mode),
            VerificationOutcome::Unknown { reason, raw } => {
                if raw.trim().is_empty() {
                    format!("{MARKER_UNKNOWN}\n{reason}")
                } else {
                    raw.clone()
                }
            }
            VerificationOutcome::Timeout { elapsed } => format!(
                "{MARKER_UNKNOWN}\nverification timed out after {:.1}s",
                elapsed.as_secs_f64()
            ),
            VerificationOutcome::ToolError { detail, exit_info } => {
                format!("verifier error ({exit_info}): {detail}")
            }
        }
    }
}

impl fmt::Display for VerificationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerificationOutcome::Successful => f.write_str(MARKER_SUCCESSFUL),
            VerificationOutcome::Failed(cex) => {
                let p = &cex.violated_property;
                write!(
                    f,
                    "{MARKER_FAILED}: {} at {}:{} in {}",
                    p.kind, p.file, p.line, p.function
                )
            }
            VerificationOutcome::Unknown { reason, .. } => {
                let first = reason.lines().next().unwrap_or("");
                write!(f, "{MARKER_UNKNOWN}: {first}")
            }
            VerificationOutcome::Timeout { elapsed } => {
                write!(f, "TIMEOUT after {:.1}s", elapsed.as_secs_f64())
            }
            VerificationOutcome::ToolError { detail, exit_info } => {
                write!(f, "TOOL ERROR ({exit_info}): {detail}")
            }
        }
    }
}

/// Anything that can check a C source file and report a verdict.
///
/// [`EsbmcVerifier`] is the production implementation; tests substitute
/// in-process stubs.
pub trait Verifier: Send + Sync {
    fn verify(&self, source: &Path) -> Result<VerificationOutcome, VerifierError>;
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn verify(&self, source: &Path) -> Result<VerificationOutcome, VerifierError> {
        (**self).verify(source)
    }
}

impl<V: Verifier + ?Sized> Verifier for std::sync::Arc<V> {
    fn verify(&self, source: &Path) -> Result<VerificationOutcome, VerifierError> {
        (**self).verify(source)
    }
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
