//! Layered configuration: built-in defaults, then the TOML file, then
//! environment variables, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use bmcfix_core::llm::Secret;
use bmcfix_core::repair::{Compiler, DEFAULT_MAX_ATTEMPTS};
use bmcfix_core::verifier::{FlagProfile, RenderMode, VerifierConfig};
use serde::Deserialize;

use crate::CliError;

pub const ENV_API_KEY: &str = "BMCFIX_API_KEY";
pub const ENV_MODEL: &str = "BMCFIX_MODEL";
pub const ENV_ENDPOINT: &str = "BMCFIX_ENDPOINT";
pub const ENV_VERIFIER: &str = "BMCFIX_VERIFIER";
pub const ENV_CONFIG: &str = "BMCFIX_CONFIG";

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

/// On-disk shape of the config file. Every field is optional; unknown keys
/// are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model_id: Option<String>,
    pub endpoint: Option<String>,
    pub max_attempts: Option<usize>,
    pub prompt_dir: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub session_dir: Option<PathBuf>,
    pub credentials_file: Option<PathBuf>,
    pub token_budget: Option<usize>,
    pub feedback: Option<FeedbackSetting>,
    #[serde(default)]
    pub temperature: TemperatureFile,
    #[serde(default)]
    pub verifier: VerifierFile,
    #[serde(default)]
    pub compiler: CompilerFile,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSetting {
    FullTrace,
    PropertyOnly,
}

impl From<FeedbackSetting> for RenderMode {
    fn from(f: FeedbackSetting) -> Self {
        match f {
            FeedbackSetting::FullTrace => RenderMode::FullTrace,
            FeedbackSetting::PropertyOnly => RenderMode::PropertyOnly,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureFile {
    pub chat: Option<f64>,
    pub fix: Option<f64>,
    pub gen: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifierFile {
    pub binary: Option<PathBuf>,
    pub profile: Option<String>,
    pub unwind: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub extra_flags: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompilerFile {
    pub command: Option<Vec<String>>,
}

/// Values given on the command line. Credentials have no flag.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub model_id: Option<String>,
    pub endpoint: Option<String>,
    pub verifier_binary: Option<PathBuf>,
    pub profile: Option<String>,
    pub unwind: Option<u32>,
    pub timeout_secs: Option<f64>,
    pub max_attempts: Option<usize>,
    pub cache_path: Option<PathBuf>,
    pub session_dir: Option<PathBuf>,
    pub prompt_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Temperatures {
    pub chat: f64,
    pub fix: f64,
    pub gen: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Temperatures {
            chat: 0.0,
            fix: 0.0,
            gen: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub verifier: VerifierConfig,
    pub model_id: String,
    pub endpoint: String,
    pub temperature: Temperatures,
    pub prompt_dir: Option<PathBuf>,
    pub cache_path: Option<PathBuf>,
    pub session_dir: Option<PathBuf>,
    pub max_attempts: usize,
    pub feedback: RenderMode,
    pub token_budget: Option<usize>,
    pub compiler: Compiler,
    api_key: Option<Secret>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            verifier: VerifierConfig::default(),
            model_id: DEFAULT_MODEL.to_string(),
            endpoint: DEFAULT_ENDPOINT.to_string(),
            temperature: Temperatures::default(),
            prompt_dir: None,
            cache_path: None,
            session_dir: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            feedback: RenderMode::FullTrace,
            token_budget: None,
            compiler: Compiler::default(),
            api_key: None,
        }
    }
}

impl AppConfig {
    /// The API key, or an error naming where it should come from.
    pub fn api_key(&self) -> Result<&Secret, CliError> {
        self.api_key.as_ref().ok_or_else(|| {
            CliError::Config(format!(
                "the live backend needs an API key: export {ENV_API_KEY}=... or set \
                 `credentials_file` to a file with mode 600"
            ))
        })
    }

    pub fn has_api_key(&self) -> bool {
        self.api_key.is_some()
    }
}

/// Resolve the effective config. `env` looks up environment variables so
/// tests can pass a fixed map.
pub fn load_config(
    file: Option<&Path>,
    env: &dyn Fn(&str) -> Option<String>,
    flags: &Overrides,
) -> Result<AppConfig, CliError> {
    let file_cfg = match file {
        Some(path) => parse_file(path)?,
        None => FileConfig::default(),
    };
    let mut cfg = AppConfig::default();

    // each key takes the value from the highest layer that sets it
    let v = &file_cfg.verifier;
    let profile: FlagProfile = match flags.profile.as_deref().or(v.profile.as_deref()) {
        Some(id) => id.parse().map_err(|e| CliError::Config(format!("{e}")))?,
        None => FlagProfile::Triage,
    };
    let binary = flags
        .verifier_binary
        .clone()
        .or_else(|| env(ENV_VERIFIER).map(PathBuf::from))
        .or_else(|| v.binary.clone())
        .unwrap_or_else(|| cfg.verifier.binary_path.clone());
    cfg.verifier = VerifierConfig::new(binary, profile);
    if let Some(u) = flags.unwind.or(v.unwind) {
        cfg.verifier.unwind = u;
    }
    match (flags.timeout_secs, v.timeout_secs) {
        (Some(t), _) => cfg.verifier.timeout = seconds(t, "--timeout")?,
        (None, Some(t)) => cfg.verifier.timeout = seconds(t, "verifier.timeout_secs")?,
        (None, None) => {}
    }
    if let Some(f) = &v.extra_flags {
        cfg.verifier.extra_flags = f.clone();
    }

    set(&mut cfg.model_id, file_cfg.model_id);
    set(&mut cfg.endpoint, file_cfg.endpoint);
    set(&mut cfg.max_attempts, file_cfg.max_attempts);
    cfg.prompt_dir = file_cfg.prompt_dir;
    cfg.cache_path = file_cfg.cache_path;
    cfg.session_dir = file_cfg.session_dir;
    cfg.token_budget = file_cfg.token_budget;
    if let Some(f) = file_cfg.feedback {
        cfg.feedback = f.into();
    }
    set(&mut cfg.temperature.chat, file_cfg.temperature.chat);
    set(&mut cfg.temperature.fix, file_cfg.temperature.fix);
    set(&mut cfg.temperature.gen, file_cfg.temperature.gen);
    if let Some(cmd) = &file_cfg.compiler.command {
        cfg.compiler = Compiler::from_command(cmd)
            .map_err(|e| CliError::Config(format!("compiler.command: {e}")))?;
    }

    // environment
    set(&mut cfg.model_id, env(ENV_MODEL));
    set(&mut cfg.endpoint, env(ENV_ENDPOINT));
    cfg.api_key = match env(ENV_API_KEY).filter(|k| !k.trim().is_empty()) {
        Some(key) => Some(Secret::new(key.trim())),
        None => match &file_cfg.credentials_file {
            Some(path) => Some(read_credentials(path)?),
            None => None,
        },
    };

    // flags
    set(&mut cfg.model_id, flags.model_id.clone());
    set(&mut cfg.endpoint, flags.endpoint.clone());
    set(&mut cfg.max_attempts, flags.max_attempts);
    if flags.cache_path.is_some() {
        cfg.cache_path = flags.cache_path.clone();
    }
    if flags.session_dir.is_some() {
        cfg.session_dir = flags.session_dir.clone();
    }
    if flags.prompt_dir.is_some() {
        cfg.prompt_dir = flags.prompt_dir.clone();
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn seconds(value: f64, what: &str) -> Result<Duration, CliError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CliError::Config(format!(
            "{what} must be a positive number of seconds"
        )));
    }
    Ok(Duration::from_secs_f64(value))
}

fn parse_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let location = e
            .span()
            .map(|span| {
                let (line, col) = line_col(&text, span.start);
                format!(":{line}:{col}")
            })
            .unwrap_or_default();
        CliError::Config(format!("{}{location}: {}", path.display(), e.message()))
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn read_credentials(path: &Path) -> Result<Secret, CliError> {
    let meta = fs::metadata(path)
        .map_err(|e| CliError::Config(format!("credentials file {}: {e}", path.display())))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let mode = meta.permissions().mode() & 0o777;
        if mode & 0o077 != 0 {
            return Err(CliError::Config(format!(
                "credentials file {} has mode {mode:o}; run `chmod 600` on it",
                path.display()
            )));
        }
    }
    #[cfg(not(unix))]
    let _ = meta;
    let key = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("credentials file {}: {e}", path.display())))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!(
            "credentials file {} is empty",
            path.display()
        )));
    }
    Ok(Secret::new(key))
}

fn validate(cfg: &AppConfig) -> Result<(), CliError> {
    cfg.verifier
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.max_attempts == 0 {
        return Err(CliError::Config("max_attempts must be at least 1".into()));
    }
    let t = &cfg.temperature;
    for (name, value) in [("chat", t.chat), ("fix", t.fix), ("gen", t.gen)] {
        if !(0.0..=2.0).contains(&value) {
            return Err(CliError::Config(format!(
                "temperature.{name} = {value} is outside [0, 2]"
            )));
        }
    }
    if let Some(dir) = &cfg.prompt_dir {
        if !dir.is_dir() {
            return Err(CliError::Config(format!(
                "prompt_dir {} is not a directory",
                dir.display()
            )));
        }
    }
    if let Some(cache) = &cfg.cache_path {
        if let Some(parent) = cache.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(CliError::Config(format!(
                    "cache_path {}: parent directory does not exist",
                    cache.display()
                )));
            }
        }
    }
    Ok(())
}
