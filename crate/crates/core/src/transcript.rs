//! Append-only JSONL session log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Message,
    VerifierRun,
    Attempt,
    Result,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    /// 0-based position in the session.
    pub seq: u64,
    pub kind: EventKind,
    pub at: DateTime<Utc>,
    /// Milliseconds since the session started.
    pub elapsed_ms: u64,
    pub payload: Value,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("transcript {}:{line}: {source}", path.display())]
    Corrupt {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("serializing transcript payload: {0}")]
    Payload(#[from] serde_json::Error),
}

/// One session's event stream. Events are flushed to disk as they are
/// appended when the transcript is file-backed.
#[derive(Debug)]
pub struct SessionTranscript {
    id: String,
    path: Option<PathBuf>,
    file: Option<File>,
    events: Vec<TranscriptEvent>,
    started: Instant,
}

/// Timestamp plus random suffix, e.g. `20261018T101500Z-3fa9c2d1`.
pub fn new_session_id() -> String {
    format!(
        "{}-{:08x}",
        Utc::now().format("%Y%m%dT%H%M%SZ"),
        rand::random::<u32>()
    )
}

impl SessionTranscript {
    /// Keeps events in memory only.
    pub fn in_memory() -> Self {
        SessionTranscript {
            id: new_session_id(),
            path: None,
            file: None,
            events: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Starts `<dir>/<id>.jsonl`, creating `dir` if needed.
    pub fn create(dir: &Path) -> Result<Self, TranscriptError> {
        let id = new_session_id();
        let path = dir.join(format!("{id}.jsonl"));
        let io_err = |source| TranscriptError::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        Ok(SessionTranscript {
            id,
            path: Some(path),
            file: Some(file),
            events: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn append(
        &mut self,
        kind: EventKind,
        payload: impl Serialize,
    ) -> Result<&TranscriptEvent, TranscriptError> {
        let event = TranscriptEvent {
            seq: self.events.len() as u64,
            kind,
            at: Utc::now(),
            elapsed_ms: u64::try_from(self.started.elapsed().as_millis()).unwrap_or(u64::MAX),
            payload: serde_json::to_value(payload)?,
        };
        if let (Some(file), Some(path)) = (&mut self.file, &self.path) {
            let mut line = serde_json::to_string(&event)?;
            line.push('\n');
            file.write_all(line.as_bytes())
                .map_err(|source| TranscriptError::Io {
                    path: path.clone(),
                    source,
                })?;
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn load(path: &Path) -> Result<Vec<TranscriptEvent>, TranscriptError> {
        let file = File::open(path).map_err(|source| TranscriptError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut events = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| TranscriptError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let event = serde_json::from_str(&line).map_err(|source| TranscriptError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?;
            events.push(event);
        }
        Ok(events)
    }
}

/// `(seq, kind, payload)` of each event: the part that is reproducible across
/// runs with a deterministic backend.
pub fn without_timestamps(events: &[TranscriptEvent]) -> Vec<(u64, EventKind, Value)> {
    events
        .iter()
        .map(|e| (e.seq, e.kind, e.payload.clone()))
        .collect()
}
