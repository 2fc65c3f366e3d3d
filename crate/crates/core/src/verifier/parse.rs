use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    Counterexample, VerificationOutcome, ViolatedProperty, MARKER_FAILED, MARKER_SUCCESSFUL,
    MARKER_UNKNOWN, MARKER_VIOLATED,
};

const REASON_CHARS: usize = 200;

/// How a counterexample is rendered into prompt text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Just the four-line `Violated property:` block.
    PropertyOnly,
    /// The checker output verbatim.
    #[default]
    FullTrace,
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^file\s+(\S+)\s+line\s+(\d+)(?:\s+column\s+\d+)?\s+function\s+(\S+)")
            .expect("static regex")
    })
}

/// Parse raw checker output. Total: every input yields an outcome.
///
/// A well-formed `Violated property:` block makes the outcome `Failed` even
/// when the `VERIFICATION FAILED` line is absent (truncated logs often lack
/// it). A failure marker with a malformed block degrades to `Unknown`.
pub fn parse_verifier_output(raw: &str) -> VerificationOutcome {
    let lines: Vec<&str> = raw.lines().collect();
    let has = |marker: &str| lines.iter().any(|l| l.trim_start().starts_with(marker));

    let block_start = lines.iter().position(|l| l.trim() == MARKER_VIOLATED);
    if let Some(start) = block_start {
        if let Some(property) = parse_property_block(&lines[start + 1..]) {
            return VerificationOutcome::Failed(Counterexample {
                violated_property: property,
                state_lines: collect_states(&lines),
                raw_text: raw.to_string(),
            });
        }
        return unknown("malformed violated-property block", raw);
    }
    if has(MARKER_FAILED) {
        return unknown("verification failed without a violated-property block", raw);
    }
    if has(MARKER_SUCCESSFUL) {
        return VerificationOutcome::Successful;
    }
    VerificationOutcome::Unknown {
        reason: raw.chars().take(REASON_CHARS).collect(),
        raw: raw.to_string(),
    }
}

fn unknown(what: &str, raw: &str) -> VerificationOutcome {
    let head: String = raw.chars().take(REASON_CHARS).collect();
    VerificationOutcome::Unknown {
        reason: format!("{what}: {head}"),
        raw: raw.to_string(),
    }
}

fn parse_property_block(block: &[&str]) -> Option<ViolatedProperty> {
    let mut rest = block.iter().map(|l| l.trim()).skip_while(|l| l.is_empty());

    let header = rest.next()?;
    let caps = header_re().captures(header)?;
    let line: u32 = caps[2].parse().ok().filter(|&n| n >= 1)?;

    let kind = rest.find(|l| !l.is_empty())?;
    if is_block_terminator(kind) {
        return None;
    }

    let condition: Vec<&str> = rest
        .take_while(|l| !l.is_empty() && !is_block_terminator(l))
        .collect();

    Some(ViolatedProperty {
        file: caps[1].to_string(),
        line,
        function: caps[3].to_string(),
        kind: kind.to_string(),
        condition: condition.join("\n"),
    })
}

fn is_block_terminator(line: &str) -> bool {
    line.starts_with(MARKER_SUCCESSFUL)
        || line.starts_with(MARKER_FAILED)
        || line.starts_with(MARKER_UNKNOWN)
        || line == MARKER_VIOLATED
}

/// Group each `State N ...` header with the assignment lines that follow it.
fn collect_states(lines: &[&str]) -> Vec<String> {
    let mut states = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in lines {
        let trimmed = line.trim();
        if trimmed.starts_with("State ") {
            if let Some(done) = current.take() {
                states.push(done.join("\n"));
            }
            current = Some(vec![line.trim_end()]);
            continue;
        }
        let Some(state) = current.as_mut() else {
            continue;
        };
        if trimmed.is_empty() || trimmed == MARKER_VIOLATED || is_block_terminator(trimmed) {
            states.push(current.take().unwrap().join("\n"));
        } else if !trimmed.chars().all(|c| c == '-') {
            state.push(line.trim_end());
        }
    }
    if let Some(done) = current {
        states.push(done.join("\n"));
    }
    states
}

/// Render a counterexample as model-facing text. Deterministic.
pub fn counterexample_to_prompt_text(cex: &Counterexample, mode: RenderMode) -> String {
    match mode {
        RenderMode::FullTrace => cex.raw_text.clone(),
        RenderMode::PropertyOnly => {
            let p = &cex.violated_property;
            let mut out = format!(
                "{MARKER_VIOLATED}\n  file {} line {} function {}\n  {}",
                p.file, p.line, p.function, p.kind
            );
            for line in p.condition.lines() {
                out.push_str("\n  ");
                out.push_str(line);
            }
            out
        }
    }
}
