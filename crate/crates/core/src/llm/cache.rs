use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Capabilities, CompletionBackend, CompletionRequest, LlmError, Message};

/// SHA-256 over the canonical serialisation of a completion request.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey(pub [u8; 32]);

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheKey({self})")
    }
}

fn put_bytes(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update((bytes.len() as u64).to_le_bytes());
    hasher.update(bytes);
}

/// Digest of (model, temperature, messages).
///
/// Layout: length-prefixed model id, length-prefixed temperature in shortest
/// round-trip decimal form, then for each message its role byte followed by
/// length-prefixed UTF-8 content. Lengths are little-endian u64.
pub fn cache_key(model_id: &str, temperature: f64, messages: &[Message]) -> CacheKey {
    let mut hasher = Sha256::new();
    put_bytes(&mut hasher, model_id.as_bytes());
    // `+ 0.0` folds -0.0 into 0.0
    put_bytes(&mut hasher, format!("{}", temperature + 0.0).as_bytes());
    for message in messages {
        hasher.update([message.role.tag()]);
        put_bytes(&mut hasher, message.content.as_bytes());
    }
    CacheKey(hasher.finalize().into())
}

/// One line of the replay cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: String,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<Message>,
    pub response: String,
}

/// Append-only JSONL store of completions keyed by [`cache_key`].
#[derive(Debug)]
pub struct ReplayCache {
    path: PathBuf,
    entries: HashMap<String, String>,
    writer: Option<File>,
}

impl ReplayCache {
    /// Read every record of `path`. A missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let mut entries = HashMap::new();
        match File::open(path) {
            Ok(file) => {
                for (n, line) in BufReader::new(file).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let record: CacheRecord = serde_json::from_str(&line).map_err(|e| {
                        LlmError::Protocol(format!(
                            "{}:{}: bad cache record: {e}",
                            path.display(),
                            n + 1
                        ))
                    })?;
                    entries.insert(record.key, record.response);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        Ok(ReplayCache {
            path: path.to_path_buf(),
            entries,
            writer: None,
        })
    }

    /// Load `path` and keep it open for appending.
    pub fn open(path: &Path) -> Result<Self, LlmError> {
        let mut cache = ReplayCache::load(path)?;
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        cache.writer = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(cache)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &CacheKey) -> Option<&str> {
        self.entries.get(&key.to_string()).map(String::as_str)
    }

    pub fn record(&mut self, record: CacheRecord) -> Result<(), LlmError> {
        if let Some(writer) = self.writer.as_mut() {
            let mut line =
                serde_json::to_string(&record).map_err(|e| LlmError::Protocol(e.to_string()))?;
            line.push('\n');
            writer.write_all(line.as_bytes())?;
            writer.flush()?;
        }
        self.entries.insert(record.key, record.response);
        Ok(())
    }
}

/// Serves completions from a replay cache only. Misses are errors.
#[derive(Debug)]
pub struct ReplayBackend {
    cache: ReplayCache,
}

impl ReplayBackend {
    pub fn new(cache: ReplayCache) -> Self {
        ReplayBackend { cache }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(ReplayBackend::new(ReplayCache::load(path)?))
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let key = cache_key(request.model_id, request.temperature, request.messages);
        self.cache
            .get(&key)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Unscripted {
                key: key.to_string(),
            })
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            live: false,
            deterministic: true,
        }
    }

    fn name(&self) -> &str {
        "replay"
    }
}

/// Wraps another backend: hits are served from the cache, misses are
/// forwarded and recorded.
pub struct CachingBackend {
    inner: Arc<dyn CompletionBackend>,
    cache: Mutex<ReplayCache>,
}

impl CachingBackend {
    pub fn new(inner: Arc<dyn CompletionBackend>, cache: ReplayCache) -> Self {
        CachingBackend {
            inner,
            cache: Mutex::new(cache),
        }
    }
}

impl CompletionBackend for CachingBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, LlmError> {
        let key = cache_key(request.model_id, request.temperature, request.messages);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.to_string());
        }
        let response = self.inner.complete(request)?;
        self.cache.lock().expect("cache lock").record(CacheRecord {
            key: key.to_string(),
            model: request.model_id.to_string(),
            temperature: request.temperature,
            messages: request.messages.to_vec(),
            response: response.clone(),
        })?;
        Ok(response)
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn name(&self) -> &str {
        self.inner.name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatThread, Role, ScriptedBackend};

    fn msgs(pairs: &[(Role, &str)]) -> Vec<Message> {
        pairs
            .iter()
            .map(|(r, c)| Message::new(*r, *c).unwrap())
            .collect()
    }

    #[test]
    fn key_is_deterministic_and_sensitive() {
        let a = msgs(&[(Role::System, "s"), (Role::User, "u")]);
        assert_eq!(cache_key("m", 0.0, &a), cache_key("m", 0.0, &a));

        let role_flipped = msgs(&[(Role::System, "s"), (Role::Assistant, "u")]);
        assert_ne!(cache_key("m", 0.0, &a), cache_key("m", 0.0, &role_flipped));

        let permuted = msgs(&[(Role::User, "u"), (Role::System, "s")]);
        assert_ne!(cache_key("m", 0.0, &a), cache_key("m", 0.0, &permuted));

        assert_ne!(cache_key("m", 0.0, &a), cache_key("m", 1.0, &a));
        assert_ne!(cache_key("m", 0.0, &a), cache_key("n", 0.0, &a));
        assert_eq!(cache_key("m", -0.0, &a), cache_key("m", 0.0, &a));
    }

    #[test]
    fn length_prefix_prevents_concatenation_collisions() {
        let split = msgs(&[(Role::User, "ab"), (Role::User, "c")]);
        let joined = msgs(&[(Role::User, "a"), (Role::User, "bc")]);
        assert_ne!(cache_key("m", 0.0, &split), cache_key("m", 0.0, &joined));
    }

    #[test]
    fn record_then_replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");

        let scripted = Arc::new(ScriptedBackend::new(["first reply".to_string()]));
        let recorder = Arc::new(CachingBackend::new(
            scripted.clone(),
            ReplayCache::open(&path).unwrap(),
        ));
        let mut live = ChatThread::new(recorder.clone(), "gpt", 0.0).unwrap();
        live.push_system("sys").unwrap();
        let recorded = live.send("hello").unwrap();

        // a second identical stack is a cache hit, not a new scripted call
        let mut again = ChatThread::new(recorder, "gpt", 0.0).unwrap();
        again.push_system("sys").unwrap();
        assert_eq!(again.send("hello").unwrap(), recorded);
        assert_eq!(scripted.calls(), 1);

        let replay: Arc<dyn CompletionBackend> = Arc::new(ReplayBackend::from_file(&path).unwrap());
        let mut responses = Vec::new();
        for _ in 0..2 {
            let mut t = ChatThread::new(replay.clone(), "gpt", 0.0).unwrap();
            t.push_system("sys").unwrap();
            responses.push(t.send("hello").unwrap().content);
        }
        assert_eq!(responses[0].as_bytes(), responses[1].as_bytes());
        assert_eq!(responses[0], "first reply");
    }

    #[test]
    fn replay_miss_is_unscripted() {
        let dir = tempfile::tempdir().unwrap();
        let replay = Arc::new(ReplayBackend::from_file(&dir.path().join("none.jsonl")).unwrap());
        let mut t = ChatThread::new(replay, "gpt", 0.0).unwrap();
        assert!(matches!(t.send("x"), Err(LlmError::Unscripted { .. })));
    }

    #[test]
    fn corrupt_cache_line_is_reported_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "not json\n").unwrap();
        let err = ReplayCache::load(&path).unwrap_err();
        assert!(err.to_string().contains("c.jsonl:1"), "{err}");
    }
}
