//! Interactive chat about one verifier verdict.
//!
//! The checker runs first and its verdict is printed before any model call.
//! The chat thread is seeded with the chat system message and a second system
//! message holding the source and the checker output, then the initial prompt
//! is sent. After that each input line is one of:
//!
//! - `/exit` ends the session
//! - `/fix-code` runs the repair loop on a separate thread and prints the
//!   verified solution, if any
//! - anything else is sent to the model as-is

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use bmcfix_core::prompts::{CHAT_CONTEXT, CHAT_INITIAL, CHAT_SYSTEM};
use bmcfix_core::repair::{fix_code, FixOptions, RepairResult};
use bmcfix_core::transcript::{EventKind, SessionTranscript};
use bmcfix_core::verifier::{VerificationOutcome, Verifier, VerifierError};
use bmcfix_core::{ChatThread, Message};
use serde_json::json;

use crate::{exit, message_payload, verifier_run_payload, CliError, Session, TranscriptObserver};

pub const EXIT_COMMAND: &str = "/exit";
pub const FIX_COMMAND: &str = "/fix-code";
const PROMPT: &str = "> ";

pub fn chat_repl(
    file: &Path,
    session: &Session,
    verifier: &dyn Verifier,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    transcript: &mut SessionTranscript,
) -> Result<i32, CliError> {
    let source = read_source(file)?;
    let outcome = verify(verifier, file)?;
    writeln!(out, "verifier: {outcome}")?;
    if let VerificationOutcome::ToolError { detail, .. } = &outcome {
        writeln!(
            out,
            "warning: the verifier failed ({detail}); chatting about its raw output"
        )?;
    }
    transcript.append(EventKind::VerifierRun, verifier_run_payload(file, &outcome))?;

    let catalog = &session.catalog;
    let mut thread = session
        .threads(session.config.temperature.chat)
        .thread()
        .map_err(runtime)?;
    let system = catalog
        .get(CHAT_SYSTEM)
        .map_err(runtime)?
        .render_with(&[])
        .map_err(runtime)?;
    let verifier_output = outcome.feedback_text(session.config.feedback);
    let context = catalog
        .get(CHAT_CONTEXT)
        .map_err(runtime)?
        .render_with(&[
            ("source_code", source.as_str()),
            ("verifier_output", &verifier_output),
        ])
        .map_err(runtime)?;
    thread.push_system(system.text).map_err(runtime)?;
    thread.push_system(context.text).map_err(runtime)?;
    for m in thread.messages() {
        transcript.append(EventKind::Message, message_payload("chat", m))?;
    }

    let initial = catalog
        .get(CHAT_INITIAL)
        .map_err(runtime)?
        .render_with(&[])
        .map_err(runtime)?;
    exchange(&mut thread, &initial.text, out, transcript)?;

    let mut line = String::new();
    loop {
        write!(out, "{PROMPT}")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            break;
        }
        let prompt = line.trim_end_matches(['\n', '\r']);
        if prompt.trim().is_empty() {
            continue;
        }
        match prompt {
            EXIT_COMMAND => break,
            FIX_COMMAND => run_fix(&source, &outcome, session, verifier, out, transcript)?,
            _ => exchange(&mut thread, prompt, out, transcript)?,
        }
    }
    Ok(exit::OK)
}

pub(crate) fn read_source(file: &Path) -> Result<String, CliError> {
    fs::read_to_string(file)
        .map_err(|e| CliError::NoInput(format!("cannot read {}: {e}", file.display())))
}

pub(crate) fn verify(
    verifier: &dyn Verifier,
    file: &Path,
) -> Result<VerificationOutcome, CliError> {
    verifier.verify(file).map_err(|e| match e {
        VerifierError::UnreadableSource { .. } => CliError::NoInput(e.to_string()),
        VerifierError::Config(c) => CliError::Config(c.to_string()),
    })
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Send one prompt and print the reply. Model failures are printed and the
/// session goes on.
fn exchange(
    thread: &mut ChatThread,
    prompt: &str,
    out: &mut dyn Write,
    transcript: &mut SessionTranscript,
) -> Result<(), CliError> {
    match thread.send(prompt) {
        Ok(reply) => {
            let n = thread.len();
            for m in &thread.messages()[n - 2..] {
                transcript.append(EventKind::Message, message_payload("chat", m))?;
            }
            writeln!(out, "{}", reply.content)?;
        }
        Err(e) => writeln!(out, "error: {e}")?,
    }
    Ok(())
}

fn run_fix(
    source: &str,
    outcome: &VerificationOutcome,
    session: &Session,
    verifier: &dyn Verifier,
    out: &mut dyn Write,
    transcript: &mut SessionTranscript,
) -> Result<(), CliError> {
    if !matches!(outcome, VerificationOutcome::Failed(_)) {
        writeln!(
            out,
            "nothing to fix: the verifier reported {}",
            outcome.label()
        )?;
        return Ok(());
    }
    let options = FixOptions {
        max_attempts: session.config.max_attempts,
        feedback: session.config.feedback,
        ..FixOptions::default()
    };
    let threads = session.threads(session.config.temperature.fix);
    let mut observer = TranscriptObserver::new(transcript, "fix");
    let result = fix_code(
        source,
        outcome,
        verifier,
        &threads,
        &session.catalog,
        &options,
        &mut observer,
    );
    observer.finish()?;
    match result {
        Ok(result) => {
            transcript.append(EventKind::Result, result_payload(&result))?;
            print_solution(&result, out)?;
        }
        Err(e) => writeln!(out, "error: {e}")?,
    }
    Ok(())
}

pub(crate) fn result_payload<O>(result: &RepairResult<O>) -> serde_json::Value {
    json!({
        "status": result.status,
        "attempts": result.attempts.len(),
        "final_code": result.final_code,
        "abort_reason": result.abort_reason,
    })
}

fn print_solution<O>(result: &RepairResult<O>, out: &mut dyn Write) -> Result<(), CliError> {
    let n = result.attempts.len();
    match &result.final_code {
        Some(code) => {
            writeln!(out, "verified solution after {n} attempt(s):")?;
            writeln!(out, "```c")?;
            write!(out, "{code}")?;
            if !code.ends_with('\n') {
                writeln!(out)?;
            }
            writeln!(out, "```")?;
        }
        None => {
            let why = result
                .abort_reason
                .as_deref()
                .map(|r| format!(": {r}"))
                .unwrap_or_default();
            writeln!(out, "no verified solution after {n} attempt(s){why}")?;
            if let Some(dir) = &result.artifacts_dir {
                writeln!(out, "candidates kept in {}", dir.display())?;
            }
        }
    }
    Ok(())
}

/// Message thread helper for tests: the messages logged for a mode.
pub fn logged_messages(transcript: &SessionTranscript, mode: &str) -> Vec<Message> {
    transcript
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Message && e.payload["mode"] == mode)
        .filter_map(|e| {
            let role = serde_json::from_value(e.payload["role"].clone()).ok()?;
            let content = e.payload["content"].as_str()?;
            Message::new(role, content).ok()
        })
        .collect()
}
