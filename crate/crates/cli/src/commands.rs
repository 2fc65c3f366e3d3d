//! Non-interactive subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bmcfix_core::genbench::{generate_samples, GenError, GenSpec};
use bmcfix_core::repair::{fix_code, FixOptions, RepairError, RepairStatus};
use bmcfix_core::transcript::{EventKind, SessionTranscript};
use bmcfix_core::triage::{
    parse_json_report, render_report, run_corpus, ReportFormat, TriageError,
};
use bmcfix_core::verifier::{VerificationOutcome, Verifier};

use crate::chat::{read_source, result_payload, verify};
use crate::{exit, verifier_run_payload, CliError, Session, TranscriptObserver};

#[derive(Debug, Clone, Default)]
pub struct FixFlags {
    /// Overwrite the input instead of writing `<stem>.fixed.c`.
    pub in_place: bool,
}

/// `dir/foo.c` becomes `dir/foo.fixed.c`.
pub fn fixed_path(file: &Path) -> PathBuf {
    let stem = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    file.with_file_name(format!("{stem}.fixed.c"))
}

/// Verify `file` and, if it is falsified, run the repair loop.
///
/// Exit status: 0 when fixed or already verifying, 2 when every attempt was
/// used, 1 when the verdict is inconclusive or the loop was aborted.
pub fn cmd_fix(
    file: &Path,
    session: &Session,
    verifier: &dyn Verifier,
    flags: &FixFlags,
    out: &mut dyn Write,
    transcript: &mut SessionTranscript,
) -> Result<i32, CliError> {
    let source = read_source(file)?;
    let outcome = verify(verifier, file)?;
    writeln!(out, "verifier: {outcome}")?;
    transcript.append(EventKind::VerifierRun, verifier_run_payload(file, &outcome))?;
    match &outcome {
        VerificationOutcome::Successful => {
            writeln!(out, "nothing to fix")?;
            return Ok(exit::OK);
        }
        VerificationOutcome::Failed(_) => {}
        other => {
            writeln!(out, "verdict is {}; not attempting a repair", other.label())?;
            return Ok(exit::INCONCLUSIVE);
        }
    }

    let options = FixOptions {
        max_attempts: session.config.max_attempts,
        feedback: session.config.feedback,
        ..FixOptions::default()
    };
    let threads = session.threads(session.config.temperature.fix);
    let mut observer = TranscriptObserver::new(transcript, "fix");
    let result = fix_code(
        &source,
        &outcome,
        verifier,
        &threads,
        &session.catalog,
        &options,
        &mut observer,
    );
    observer.finish()?;
    let result = result.map_err(|e| match e {
        RepairError::Prompt(p) => CliError::Config(p.to_string()),
        other => CliError::Runtime(other.to_string()),
    })?;
    transcript.append(EventKind::Result, result_payload(&result))?;

    for a in &result.attempts {
        writeln!(out, "attempt {}: {}", a.index, a.outcome)?;
    }
    let n = result.attempts.len();
    match result.status {
        RepairStatus::Fixed => {
            let target = if flags.in_place {
                file.to_path_buf()
            } else {
                fixed_path(file)
            };
            let code = result.final_code.as_deref().unwrap_or_default();
            fs::write(&target, code)
                .map_err(|e| CliError::Runtime(format!("writing {}: {e}", target.display())))?;
            writeln!(
                out,
                "fixed after {n} attempt(s); wrote {}",
                target.display()
            )?;
            Ok(exit::OK)
        }
        RepairStatus::Exhausted => {
            writeln!(out, "no verified fix after {n} attempt(s)")?;
            if let Some(dir) = &result.artifacts_dir {
                writeln!(out, "candidates kept in {}", dir.display())?;
            }
            Ok(exit::EXHAUSTED)
        }
        RepairStatus::Aborted => {
            let reason = result.abort_reason.as_deref().unwrap_or("unknown");
            writeln!(out, "aborted after {n} attempt(s): {reason}")?;
            Ok(exit::INCONCLUSIVE)
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriageFlags {
    pub jobs: usize,
    pub format: ReportFormat,
    pub out_file: Option<PathBuf>,
    /// Drop per-file durations so reports compare byte for byte.
    pub no_timings: bool,
}

impl Default for TriageFlags {
    fn default() -> Self {
        TriageFlags {
            jobs: 1,
            format: ReportFormat::Table,
            out_file: None,
            no_timings: false,
        }
    }
}

pub fn cmd_triage(
    dir: &Path,
    verifier: &dyn Verifier,
    flags: &TriageFlags,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let report = run_corpus(dir, verifier, flags.jobs).map_err(|e| match e {
        TriageError::EmptyCorpus(_) | TriageError::Io { .. } => CliError::NoInput(e.to_string()),
        TriageError::ZeroParallelism => CliError::Config(e.to_string()),
        TriageError::Pool(_) => CliError::Runtime(e.to_string()),
    })?;
    let report = if flags.no_timings {
        report.without_timings()
    } else {
        report
    };
    emit(
        &render_report(&report, flags.format),
        flags.out_file.as_deref(),
        out,
    )?;
    Ok(exit::OK)
}

/// Re-render a saved JSON triage report.
pub fn cmd_report(file: &Path, format: ReportFormat, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = fs::read_to_string(file)
        .map_err(|e| CliError::NoInput(format!("cannot read {}: {e}", file.display())))?;
    let report = parse_json_report(&text).map_err(|e| {
        CliError::NoInput(format!(
            "{} is not a triage JSON report: {e}",
            file.display()
        ))
    })?;
    out.write_all(render_report(&report, format).as_bytes())?;
    Ok(exit::OK)
}

/// Generate a sample corpus. Writes `gen-report.json` next to the samples.
pub fn cmd_gen(spec: &GenSpec, session: &Session, out: &mut dyn Write) -> Result<i32, CliError> {
    let threads = session.threads(spec.temperature);
    let report = generate_samples(spec, &threads, &session.catalog, &session.config.compiler)
        .map_err(|e| match e {
            GenError::Invalid(_) | GenError::Prompt(_) | GenError::Compile(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        })?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let path = spec.output_dir.join("gen-report.json");
    fs::write(&path, json + "\n")
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
    writeln!(
        out,
        "generated {} of {}: {} compiled first try, {} after repair, {} failed, {} generation errors",
        report.generated,
        spec.count,
        report.compiled_first_try,
        report.compiled_after_repair,
        report.failed,
        report.generation_errors
    )?;
    writeln!(out, "report: {}", path.display())?;
    Ok(if report.generation_errors == 0 {
        exit::OK
    } else {
        exit::INCONCLUSIVE
    })
}

fn emit(text: &str, file: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match file {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display()))),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}
