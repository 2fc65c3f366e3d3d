use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use thiserror::Error;
use wait_timeout::ChildExt;

use super::{
    parse_verifier_output, ConfigError, VerificationOutcome, Verifier, VerifierConfig,
    MARKER_FAILED, MARKER_SUCCESSFUL, MARKER_UNKNOWN, MARKER_VIOLATED,
};

const DETAIL_CHARS: usize = 2000;

#[derive(Debug, Error)]
pub enum VerifierError {
    #[error("invalid verifier configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot read source {}: {source}", path.display())]
    UnreadableSource {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Run the checker on `source_path`.
///
/// Spawn failures, watchdog expiry and unrecognisable crashes are reported as
/// outcome variants, not errors. Only an invalid config or an unreadable
/// source file is an `Err`.
pub fn run_verifier(
    source_path: &Path,
    config: &VerifierConfig,
) -> Result<VerificationOutcome, VerifierError> {
    config.validate()?;
    File::open(source_path).map_err(|source| VerifierError::UnreadableSource {
        path: source_path.to_path_buf(),
        source,
    })?;

    let mut cmd = Command::new(&config.binary_path);
    cmd.args(config.arguments())
        .arg(source_path)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        // own process group, so the watchdog can take down wrapper scripts too
        cmd.process_group(0);
    }

    let started = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(child) => child,
        Err(e) => {
            let detail = if e.kind() == io::ErrorKind::NotFound {
                format!("binary not found: {}", config.binary_path.display())
            } else {
                format!("failed to spawn {}: {e}", config.binary_path.display())
            };
            return Ok(VerificationOutcome::ToolError {
                detail,
                exit_info: "spawn failed".to_string(),
            });
        }
    };

    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());

    let status = match child.wait_timeout(config.timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            kill_tree(&mut child);
            let _ = child.wait();
            let elapsed = started.elapsed();
            let _ = (stdout.join(), stderr.join());
            return Ok(VerificationOutcome::Timeout { elapsed });
        }
        Err(e) => {
            kill_tree(&mut child);
            let _ = child.wait();
            return Ok(VerificationOutcome::ToolError {
                detail: format!("waiting for verifier failed: {e}"),
                exit_info: "wait failed".to_string(),
            });
        }
    };

    let mut output = stdout.join().unwrap_or_default();
    let err_text = stderr.join().unwrap_or_default();
    if !err_text.is_empty() {
        if !output.is_empty() && !output.ends_with('\n') {
            output.push('\n');
        }
        output.push_str(&err_text);
    }
    Ok(classify_exit(&output, status))
}

fn classify_exit(output: &str, status: ExitStatus) -> VerificationOutcome {
    if !status.success() && !has_verdict_marker(output) {
        let detail = if output.trim().is_empty() {
            "verifier exited without output".to_string()
        } else {
            output.chars().take(DETAIL_CHARS).collect()
        };
        return VerificationOutcome::ToolError {
            detail,
            exit_info: status.to_string(),
        };
    }
    parse_verifier_output(output)
}

fn has_verdict_marker(output: &str) -> bool {
    [
        MARKER_SUCCESSFUL,
        MARKER_FAILED,
        MARKER_UNKNOWN,
        MARKER_VIOLATED,
    ]
    .iter()
    .any(|m| output.contains(m))
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut pipe) = pipe {
            let _ = pipe.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    {
        if let Ok(pid) = libc::pid_t::try_from(child.id()) {
            // SAFETY: plain syscall on a process group we created.
            unsafe {
                libc::kill(-pid, libc::SIGKILL);
            }
        }
    }
    let _ = child.kill();
}

/// [`Verifier`] backed by an external checker binary.
#[derive(Debug, Clone)]
pub struct EsbmcVerifier {
    config: VerifierConfig,
}

impl EsbmcVerifier {
    pub fn new(config: VerifierConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(EsbmcVerifier { config })
    }

    pub fn config(&self) -> &VerifierConfig {
        &self.config
    }
}

impl Verifier for EsbmcVerifier {
    fn verify(&self, source: &Path) -> Result<VerificationOutcome, VerifierError> {
        run_verifier(source, &self.config)
    }
}
