//! Prompt templates, the builtin catalog, and the system-message linter.

mod catalog;
mod lint;
mod template;

use std::path::PathBuf;

use thiserror::Error;

pub use catalog::{
    Catalog, CHAT_CONTEXT, CHAT_INITIAL, CHAT_SYSTEM, FIX_CODE, FIX_COMPILE, FIX_SYSTEM,
    GEN_C_SAMPLE,
};
pub use lint::{lint_system_message, SystemMessageReport, MAX_SYSTEM_TOKENS, MIN_ABSOLUTE_RATIO};
pub use template::{Origin, PromptTemplate, Rendered};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("template `{template}` needs a binding for `{name}`")]
    MissingBinding { template: String, name: String },
    #[error("no template with id `{0}`")]
    UnknownTemplate(String),
    #[error("reading prompt {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PartialEq for PromptError {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                PromptError::MissingBinding {
                    template: a,
                    name: b,
                },
                PromptError::MissingBinding {
                    template: c,
                    name: d,
                },
            ) => a == c && b == d,
            (PromptError::UnknownTemplate(a), PromptError::UnknownTemplate(b)) => a == b,
            _ => false,
        }
    }
}

/// Rough token count: one token per four bytes, rounded up. No tokenizer is
/// embedded, so treat it as an order-of-magnitude guard.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_estimate() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("a"), 1);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
        assert_eq!(estimate_tokens(&"x".repeat(4000)), 1000);
    }
}
