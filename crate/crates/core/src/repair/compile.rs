use std::fs;
use std::io;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("compiler `{0}` not found; set `compiler.command` in the config")]
    CompilerNotFound(String),
    #[error("compiler command is empty")]
    EmptyCommand,
    #[error("compile gate I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub ok: bool,
    /// Compiler stderr, verbatim.
    pub diagnostics: String,
    pub exit_info: String,
}

/// A C compiler invocation: program plus flags placed before the source file.
/// Libraries in `link_flags` go after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compiler {
    pub program: String,
    pub flags: Vec<String>,
    pub link_flags: Vec<String>,
}

impl Default for Compiler {
    fn default() -> Self {
        Compiler {
            program: "cc".to_string(),
            flags: vec![
                "-std=gnu11".to_string(),
                "-Werror=implicit-function-declaration".to_string(),
            ],
            link_flags: vec!["-lm".to_string()],
        }
    }
}

impl Compiler {
    /// Build from a full command line such as `["clang", "-std=c99"]`.
    pub fn from_command(command: &[String]) -> Result<Self, CompileError> {
        let (program, flags) = command.split_first().ok_or(CompileError::EmptyCommand)?;
        Ok(Compiler {
            program: program.clone(),
            flags: flags.to_vec(),
            link_flags: vec!["-lm".to_string()],
        })
    }
}

/// Compile and link `source` into a throwaway binary inside a temp dir.
///
/// The compiler runs with the temp dir as working directory on a file named
/// `candidate.c`, so diagnostics do not depend on where the temp dir lives.
pub fn compile_gate(source: &str, compiler: &Compiler) -> Result<CompileResult, CompileError> {
    let dir = tempfile::Builder::new().prefix("bmcfix-cc-").tempdir()?;
    fs::write(dir.path().join("candidate.c"), source)?;
    let output = Command::new(&compiler.program)
        .current_dir(dir.path())
        .args(&compiler.flags)
        .args(["-o", "candidate.out", "candidate.c"])
        .args(&compiler.link_flags)
        .output()
        .map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => CompileError::CompilerNotFound(compiler.program.clone()),
            _ => CompileError::Io(e),
        })?;
    Ok(CompileResult {
        ok: output.status.success(),
        diagnostics: String::from_utf8_lossy(&output.stderr).into_owned(),
        exit_info: output.status.to_string(),
    })
}
