//! Sample-corpus generation: ask the model for C programs, write them out,
//! and push the ones that do not compile through the compile-repair loop.

use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::ThreadFactory;
use crate::prompts::{Catalog, PromptError, GEN_C_SAMPLE};
use crate::repair::{
    compile_gate, extract_code, repair_compilation, CompileError, Compiler, NoObserver,
    RepairError, DEFAULT_MAX_ATTEMPTS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub count: usize,
    pub temperature: f64,
    /// Advisory bounds; they live in the prompt and are not checked.
    pub min_lines: usize,
    pub max_lines: usize,
    pub output_dir: PathBuf,
    pub naming_prefix: String,
    /// Route non-compiling samples through compile repair.
    pub repair_compile: bool,
    pub max_repair_attempts: usize,
    pub jobs: usize,
}

impl GenSpec {
    pub fn new(count: usize, output_dir: impl Into<PathBuf>) -> Self {
        GenSpec {
            count,
            temperature: 1.0,
            min_lines: 10,
            max_lines: 50,
            output_dir: output_dir.into(),
            naming_prefix: "sample".to_string(),
            repair_compile: false,
            max_repair_attempts: DEFAULT_MAX_ATTEMPTS,
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.count == 0 {
            return Err(GenError::Invalid("count must be at least 1".into()));
        }
        if self.min_lines >= self.max_lines {
            return Err(GenError::Invalid(format!(
                "min_lines ({}) must be below max_lines ({})",
                self.min_lines, self.max_lines
            )));
        }
        if self.jobs == 0 {
            return Err(GenError::Invalid("jobs must be at least 1".into()));
        }
        if self.repair_compile && self.max_repair_attempts == 0 {
            return Err(GenError::Invalid(
                "max_repair_attempts must be at least 1".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GenError::Invalid(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// `<prefix><i>.c`, 1-based.
    pub fn file_name(&self, index: usize) -> String {
        format!("{}{index}.c", self.naming_prefix)
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("writing {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GenStatus {
    CompiledFirstTry,
    CompiledAfterRepair {
        attempts: usize,
    },
    /// Written but still not compiling.
    Failed {
        reason: String,
    },
    /// The model produced nothing usable; no file was written.
    GenerationError {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRow {
    pub index: usize,
    pub file: String,
    #[serde(flatten)]
    pub status: GenStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GenReport {
    /// Files written.
    pub generated: usize,
    pub compiled_first_try: usize,
    pub compiled_after_repair: usize,
    pub failed: usize,
    pub generation_errors: usize,
    pub rows: Vec<GenRow>,
}

impl GenReport {
    fn from_rows(rows: Vec<GenRow>) -> Self {
        let mut report = GenReport::default();
        for row in &rows {
            match row.status {
                GenStatus::CompiledFirstTry => report.compiled_first_try += 1,
                GenStatus::CompiledAfterRepair { .. } => report.compiled_after_repair += 1,
                GenStatus::Failed { .. } => report.failed += 1,
                GenStatus::GenerationError { .. } => report.generation_errors += 1,
            }
        }
        report.generated = report.compiled_first_try + report.compiled_after_repair + report.failed;
        report.rows = rows;
        report
    }

    /// Samples that went through the compile gate a second time or never
    /// passed it.
    pub fn entered_repair(&self) -> usize {
        self.compiled_after_repair + self.failed
    }
}

/// Generate `spec.count` independent samples. Each sample is its own
/// single-prompt thread at `spec.temperature`. A model failure produces a
/// `GenerationError` row instead of stopping the run; compiler setup errors
/// stop it.
pub fn generate_samples(
    spec: &GenSpec,
    threads: &ThreadFactory,
    catalog: &Catalog,
    compiler: &Compiler,
) -> Result<GenReport, GenError> {
    spec.validate()?;
    let prompt = catalog.get(GEN_C_SAMPLE)?.render_with(&[])?.text;
    fs::create_dir_all(&spec.output_dir).map_err(|source| GenError::Io {
        path: spec.output_dir.clone(),
        source,
    })?;
    let threads = threads.with_temperature(spec.temperature);
    let one = |index| generate_one(spec, index, &prompt, &threads, catalog, compiler);

    let rows: Result<Vec<GenRow>, GenError> = if spec.jobs == 1 {
        (1..=spec.count).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()?;
        pool.install(|| (1..=spec.count).into_par_iter().map(one).collect())
    };
    Ok(GenReport::from_rows(rows?))
}

fn generate_one(
    spec: &GenSpec,
    index: usize,
    prompt: &str,
    threads: &ThreadFactory,
    catalog: &Catalog,
    compiler: &Compiler,
) -> Result<GenRow, GenError> {
    let file = spec.file_name(index);
    let row = |status| GenRow {
        index,
        file: file.clone(),
        status,
    };
    let reply = match threads.thread().and_then(|mut t| t.send(prompt)) {
        Ok(reply) => reply,
        Err(e) => {
            return Ok(row(GenStatus::GenerationError {
                reason: e.to_string(),
            }))
        }
    };
    let path = spec.output_dir.join(&file);
    let write = |code: &str| {
        fs::write(&path, code).map_err(|source| GenError::Io {
            path: path.clone(),
            source,
        })
    };
    let code = extract_code(&reply.content);
    write(code)?;

    let first = compile_gate(code, compiler)?;
    if first.ok {
        return Ok(row(GenStatus::CompiledFirstTry));
    }
    if !spec.repair_compile {
        return Ok(row(GenStatus::Failed {
            reason: first_line(&first.diagnostics),
        }));
    }
    match repair_compilation(
        code,
        compiler,
        threads,
        catalog,
        spec.max_repair_attempts,
        &mut NoObserver,
    ) {
        Ok(result) => match result.final_code {
            Some(fixed) if result.is_fixed() => {
                write(&fixed)?;
                Ok(row(GenStatus::CompiledAfterRepair {
                    attempts: result.attempts.len(),
                }))
            }
            _ => {
                let reason = result
                    .abort_reason
                    .or_else(|| {
                        result
                            .attempts
                            .last()
                            .map(|a| first_line(&a.outcome.diagnostics))
                    })
                    .unwrap_or_else(|| format!("{:?}", result.status));
                Ok(row(GenStatus::Failed { reason }))
            }
        },
        Err(RepairError::Compile(e)) => Err(e.into()),
        Err(e) => Ok(row(GenStatus::Failed {
            reason: e.to_string(),
        })),
    }
}

fn first_line(diagnostics: &str) -> String {
    diagnostics
        .lines()
        .find(|l| l.contains("error"))
        .or_else(|| diagnostics.lines().next())
        .unwrap_or("compilation failed")
        .to_string()
}
