use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bmcfix_cli::config::ENV_CONFIG;
use bmcfix_cli::{
    build_backend, chat_repl, cmd_fix, cmd_gen, cmd_report, cmd_triage, load_config,
    resolve_verifier, BackendChoice, CliError, FixFlags, Overrides, Session, TriageFlags,
};
use bmcfix_core::genbench::GenSpec;
use bmcfix_core::transcript::SessionTranscript;
use bmcfix_core::triage::ReportFormat;
use clap::{Parser, Subcommand};

/// Counterexample-guided repair of C programs with a bounded model checker
/// and a chat model.
///
/// Exit status: 0 ok, 1 inconclusive or aborted, 2 repair attempts
/// exhausted, 64 configuration error, 66 unreadable input, 69 verifier not
/// available.
#[derive(Debug, Parser)]
#[command(name = "bmcfix", version)]
struct Cli {
    /// TOML config file (default: $BMCFIX_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Completion backend: live, replay, or scripted:PATH.
    #[arg(long, global = true, default_value = "live")]
    backend: BackendChoice,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Path or name of the ESBMC-compatible verifier.
    #[arg(long, global = true)]
    verifier: Option<PathBuf>,
    /// Verifier flag profile: triage or overflow-kinduction.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[arg(long, global = true)]
    unwind: Option<u32>,
    /// Verifier wall-clock limit in seconds.
    #[arg(long, global = true)]
    timeout: Option<f64>,
    /// Replay cache (JSONL).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Directory for session transcripts.
    #[arg(long, global = true)]
    session_dir: Option<PathBuf>,
    /// Directory of `<template-id>.txt` prompt overrides.
    #[arg(long, global = true)]
    prompt_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Chat about the verifier's verdict on FILE; `/fix-code` repairs, `/exit` quits.
    Chat { file: PathBuf },
    /// Verify FILE and repair it without interaction.
    Fix {
        file: PathBuf,
        /// Overwrite FILE instead of writing FILE's stem + `.fixed.c`.
        #[arg(long)]
        in_place: bool,
        #[arg(long)]
        max_attempts: Option<usize>,
    },
    /// Verify every `.c` file in DIR and bin the results.
    Triage {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leave out per-file durations.
        #[arg(long)]
        no_timings: bool,
    },
    /// Generate a corpus of C samples.
    Gen {
        #[arg(short = 'n', long = "count")]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value = "samples")]
        out: PathBuf,
        /// File name prefix; files are PREFIX1.c, PREFIX2.c, ...
        #[arg(long, default_value = "sample")]
        prefix: String,
        /// Feed compiler errors back to the model for samples that do not compile.
        #[arg(long)]
        repair_compile: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        max_attempts: Option<usize>,
    },
    /// Render a saved JSON triage report.
    Report {
        file: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut overrides = Overrides {
        model_id: cli.model,
        endpoint: cli.endpoint,
        verifier_binary: cli.verifier,
        profile: cli.profile,
        unwind: cli.unwind,
        timeout_secs: cli.timeout,
        max_attempts: None,
        cache_path: cli.cache,
        session_dir: cli.session_dir,
        prompt_dir: cli.prompt_dir,
    };
    if let Command::Fix { max_attempts, .. } = &cli.command {
        overrides.max_attempts = *max_attempts;
    }
    let config_file = cli
        .config
        .or_else(|| std::env::var_os(ENV_CONFIG).map(PathBuf::from));
    let config = load_config(
        config_file.as_deref(),
        &|k| std::env::var(k).ok(),
        &overrides,
    )?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match cli.command {
        Command::Chat { file } => {
            let verifier = resolve_verifier(&config)?;
            let session = Session::new(config.clone(), build_backend(&cli.backend, &config)?)?;
            let mut transcript = session.transcript()?;
            let stdin = io::stdin();
            let mut input = stdin.lock();
            let code = chat_repl(
                &file,
                &session,
                &verifier,
                &mut input,
                &mut out,
                &mut transcript,
            )?;
            note_transcript(&transcript);
            code
        }
        Command::Fix { file, in_place, .. } => {
            let verifier = resolve_verifier(&config)?;
            let session = Session::new(config.clone(), build_backend(&cli.backend, &config)?)?;
            let mut transcript = session.transcript()?;
            let code = cmd_fix(
                &file,
                &session,
                &verifier,
                &FixFlags { in_place },
                &mut out,
                &mut transcript,
            )?;
            note_transcript(&transcript);
            code
        }
        Command::Triage {
            dir,
            jobs,
            format,
            out: out_file,
            no_timings,
        } => {
            let verifier = resolve_verifier(&config)?;
            let flags = TriageFlags {
                jobs,
                format,
                out_file,
                no_timings,
            };
            cmd_triage(&dir, &verifier, &flags, &mut out)?
        }
        Command::Gen {
            count,
            temperature,
            out: dir,
            prefix,
            repair_compile,
            jobs,
            max_attempts,
        } => {
            let session = Session::new(config.clone(), build_backend(&cli.backend, &config)?)?;
            let spec = GenSpec {
                temperature,
                naming_prefix: prefix,
                repair_compile,
                jobs,
                max_repair_attempts: max_attempts.unwrap_or(config.max_attempts),
                ..GenSpec::new(count, dir)
            };
            cmd_gen(&spec, &session, &mut out)?
        }
        Command::Report { file, format } => cmd_report(&file, format, &mut out)?,
    };
    out.flush()?;
    Ok(code)
}

fn note_transcript(transcript: &SessionTranscript) {
    if let Some(path) = transcript.path() {
        eprintln!("transcript: {}", path.display());
    }
}
