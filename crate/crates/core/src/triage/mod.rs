//! Corpus triage into the S/U/B/O partition.

mod report;

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::verifier::{VerificationOutcome, Verifier};

pub use report::{parse_json_report, render_report, ReportFormat};

/// Phrase in the checker's kind line that marks a scanf-rooted overflow.
pub const SCANF_OVERFLOW_KIND: &str = "buffer overflow on scanf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TriageCategory {
    /// Verification successful.
    S,
    /// No verdict: unknown, timeout, or tool failure.
    U,
    /// Buffer overflow rooted in `scanf`.
    B,
    /// Any other violated property.
    O,
}

impl TriageCategory {
    pub const ALL: [TriageCategory; 4] = [
        TriageCategory::S,
        TriageCategory::U,
        TriageCategory::B,
        TriageCategory::O,
    ];

    pub fn letter(self) -> &'static str {
        match self {
            TriageCategory::S => "S",
            TriageCategory::U => "U",
            TriageCategory::B => "B",
            TriageCategory::O => "O",
        }
    }
}

impl fmt::Display for TriageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for TriageCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" => Ok(TriageCategory::S),
            "U" => Ok(TriageCategory::U),
            "B" => Ok(TriageCategory::B),
            "O" => Ok(TriageCategory::O),
            other => Err(format!("unknown triage category `{other}`")),
        }
    }
}

/// Bin one outcome. Only the first reported property counts.
pub fn classify(outcome: &VerificationOutcome) -> TriageCategory {
    match outcome {
        VerificationOutcome::Successful => TriageCategory::S,
        VerificationOutcome::Unknown { .. }
        | VerificationOutcome::Timeout { .. }
        | VerificationOutcome::ToolError { .. } => TriageCategory::U,
        VerificationOutcome::Failed(cex) => {
            if cex
                .violated_property
                .kind
                .to_lowercase()
                .contains(SCANF_OVERFLOW_KIND)
            {
                TriageCategory::B
            } else {
                TriageCategory::O
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRow {
    /// File name relative to the corpus dir.
    pub file: String,
    pub category: TriageCategory,
    /// Violation kind, for B and O rows.
    pub kind: Option<String>,
    pub line: Option<u32>,
    pub function: Option<String>,
    /// Wall time of the checker run; `None` when timings are stripped.
    pub duration_ms: Option<u64>,
}

impl CorpusRow {
    pub fn new(
        file: impl Into<String>,
        outcome: &VerificationOutcome,
        duration_ms: Option<u64>,
    ) -> Self {
        let property = outcome.counterexample().map(|c| &c.violated_property);
        CorpusRow {
            file: file.into(),
            category: classify(outcome),
            kind: property.map(|p| p.kind.clone()),
            line: property.map(|p| p.line),
            function: property.map(|p| p.function.clone()),
            duration_ms,
        }
    }
}

/// Per-file rows plus category counts. `counts` always holds all four
/// categories and sums to `total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub rows: Vec<CorpusRow>,
    pub counts: std::collections::BTreeMap<TriageCategory, usize>,
    pub total: usize,
}

impl CorpusReport {
    /// Rows are sorted by file name.
    pub fn from_rows(mut rows: Vec<CorpusRow>) -> Self {
        rows.sort_by(|a, b| a.file.cmp(&b.file));
        let mut counts: std::collections::BTreeMap<_, _> =
            TriageCategory::ALL.iter().map(|&c| (c, 0)).collect();
        for row in &rows {
            *counts.entry(row.category).or_default() += 1;
        }
        CorpusReport {
            total: rows.len(),
            rows,
            counts,
        }
    }

    pub fn count(&self, category: TriageCategory) -> usize {
        self.counts.get(&category).copied().unwrap_or(0)
    }

    /// Copy with every duration cleared, for byte-stable comparisons.
    pub fn without_timings(&self) -> Self {
        let mut copy = self.clone();
        for row in &mut copy.rows {
            row.duration_ms = None;
        }
        copy
    }
}

#[derive(Debug, Error)]
pub enum TriageError {
    #[error("no .c files in {}", .0.display())]
    EmptyCorpus(PathBuf),
    #[error("reading corpus {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// `.c` files directly inside `dir`, sorted by name.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, TriageError> {
    let io_err = |source| TriageError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "c") {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(TriageError::EmptyCorpus(dir.to_path_buf()));
    }
    files.sort();
    Ok(files)
}

/// Verify every `.c` file in `dir` with at most `parallelism` concurrent
/// checker runs. A file whose run fails becomes a U row.
pub fn run_corpus(
    dir: &Path,
    verifier: &dyn Verifier,
    parallelism: usize,
) -> Result<CorpusReport, TriageError> {
    if parallelism == 0 {
        return Err(TriageError::ZeroParallelism);
    }
    let files = corpus_files(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()?;
    let rows = pool.install(|| {
        files
            .par_iter()
            .map(|path| {
                let started = Instant::now();
                let outcome =
                    verifier
                        .verify(path)
                        .unwrap_or_else(|e| VerificationOutcome::ToolError {
                            detail: e.to_string(),
                            exit_info: "not run".to_string(),
                        });
                let ms = u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX);
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                CorpusRow::new(name, &outcome, Some(ms))
            })
            .collect::<Vec<_>>()
    });
    Ok(CorpusReport::from_rows(rows))
}
