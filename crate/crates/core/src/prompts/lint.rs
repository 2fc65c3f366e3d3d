use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::estimate_tokens;

/// Above this many estimated tokens a system message is flagged as too long.
pub const MAX_SYSTEM_TOKENS: usize = 600;
/// Minimum share of sentences phrased as absolute instructions.
pub const MIN_ABSOLUTE_RATIO: f64 = 0.5;

const IMPERATIVE_VERBS: &[&str] = &[
    "always", "never", "only", "do", "don't", "use", "reply", "respond", "answer", "provide",
    "give", "return", "output", "include", "explain", "keep", "write", "generate", "fix", "follow",
    "ignore", "refuse", "avoid", "ensure", "identify", "analyze", "analyse", "state", "list",
    "describe", "add", "remove", "check", "treat", "report", "place", "produce",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMessageReport {
    pub estimated_tokens: usize,
    pub ends_with_ok_request: bool,
    /// Share of sentences that open with an absolute instruction.
    pub absolute_term_ratio: f64,
    pub opens_with_purpose: bool,
    pub findings: Vec<String>,
}

fn purpose_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?i)^(you are|you're|your (purpose|role|task|job|goal|function) is|you shall (act|serve|be|operate) as|you will (act|serve) as|act as)\b",
        )
        .expect("static regex")
    })
}

fn ok_request_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?i:\b(reply|respond|answer|say|acknowledge)\b).*\bOK\b"#)
            .expect("static regex")
    })
}

fn absolute_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^you (shall|must|will)\b").expect("static regex"))
}

/// Split into sentences on `.`, `!` or `?` followed by whitespace, and on line
/// breaks. Bullet and numbering markers at line starts are dropped.
pub(crate) fn sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = strip_list_marker(line.trim());
        let mut current = String::new();
        let mut chars = line.chars().peekable();
        while let Some(c) = chars.next() {
            current.push(c);
            let at_break =
                matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace());
            if at_break {
                push_sentence(&mut out, &current);
                current.clear();
            }
        }
        push_sentence(&mut out, &current);
    }
    out
}

fn push_sentence(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn strip_list_marker(line: &str) -> &str {
    if let Some(rest) = line.strip_prefix("- ").or_else(|| line.strip_prefix("* ")) {
        return rest.trim_start();
    }
    let digits = line.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return rest.trim_start();
        }
    }
    line
}

fn is_absolute(sentence: &str) -> bool {
    if absolute_re().is_match(sentence) {
        return true;
    }
    let first = sentence
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric() && c != '\'')
        .to_ascii_lowercase();
    IMPERATIVE_VERBS.contains(&first.as_str())
}

/// Check a system message against the authoring criteria: open with the
/// model's purpose, phrase instructions in absolute terms, stay under
/// [`MAX_SYSTEM_TOKENS`], end by asking for an "OK".
pub fn lint_system_message(text: &str) -> SystemMessageReport {
    let estimated_tokens = estimate_tokens(text);
    let sentences = sentences(text);

    let opens_with_purpose = sentences.first().is_some_and(|s| purpose_re().is_match(s));
    let ends_with_ok_request = sentences
        .last()
        .is_some_and(|s| ok_request_re().is_match(s));
    let absolute_term_ratio = if sentences.is_empty() {
        0.0
    } else {
        sentences.iter().filter(|s| is_absolute(s)).count() as f64 / sentences.len() as f64
    };

    let mut findings = Vec::new();
    if !opens_with_purpose {
        findings.push(
            "first sentence should state the model's purpose (e.g. \"You are ...\")".to_string(),
        );
    }
    if absolute_term_ratio < MIN_ABSOLUTE_RATIO {
        findings.push(format!(
            "only {:.0}% of sentences are absolute instructions (\"You shall ...\", \"You shall not ...\", imperatives); aim for at least {:.0}%",
            absolute_term_ratio * 100.0,
            MIN_ABSOLUTE_RATIO * 100.0
        ));
    }
    if text.trim().is_empty() {
        findings.push("message is empty".to_string());
    } else if estimated_tokens > MAX_SYSTEM_TOKENS {
        findings.push(format!(
            "message is ~{estimated_tokens} tokens; keep it under {MAX_SYSTEM_TOKENS}"
        ));
    }
    if !ends_with_ok_request {
        findings.push("last sentence should ask the model to reply with \"OK\"".to_string());
    }

    SystemMessageReport {
        estimated_tokens,
        ends_with_ok_request,
        absolute_term_ratio,
        opens_with_purpose,
        findings,
    }
}
