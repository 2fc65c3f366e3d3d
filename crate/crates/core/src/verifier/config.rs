use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown verifier profile `{0}` (known: triage, overflow-kinduction)")]
    UnknownProfile(String),
    #[error("unwind bound must be at least 1")]
    ZeroUnwind,
    #[error("verifier timeout must be positive")]
    ZeroTimeout,
}

/// Named checker flag sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FlagProfile {
    /// Plain checking, deep unwinding. Used for corpus triage.
    Triage,
    /// `--overflow --k-induction` with a shallow bound.
    OverflowKInduction,
}

impl FlagProfile {
    pub fn id(self) -> &'static str {
        match self {
            FlagProfile::Triage => "triage",
            FlagProfile::OverflowKInduction => "overflow-kinduction",
        }
    }

    pub fn flags(self) -> &'static [&'static str] {
        match self {
            FlagProfile::Triage => &[],
            FlagProfile::OverflowKInduction => &["--overflow", "--k-induction"],
        }
    }

    pub fn default_unwind(self) -> u32 {
        match self {
            FlagProfile::Triage => 50,
            FlagProfile::OverflowKInduction => 1,
        }
    }
}

impl FromStr for FlagProfile {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triage" => Ok(FlagProfile::Triage),
            "overflow-kinduction" => Ok(FlagProfile::OverflowKInduction),
            other => Err(ConfigError::UnknownProfile(other.to_string())),
        }
    }
}

impl TryFrom<String> for FlagProfile {
    type Error = ConfigError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<FlagProfile> for String {
    fn from(p: FlagProfile) -> String {
        p.id().to_string()
    }
}

impl fmt::Display for FlagProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifierConfig {
    pub binary_path: PathBuf,
    pub profile: FlagProfile,
    pub extra_flags: Vec<String>,
    /// Loop-unrolling bound passed as `--unwind`.
    pub unwind: u32,
    pub timeout: Duration,
}

impl VerifierConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

    /// Profile defaults: the profile's unwind bound and a 10 s timeout.
    pub fn new(binary_path: impl Into<PathBuf>, profile: FlagProfile) -> Self {
        VerifierConfig {
            binary_path: binary_path.into(),
            profile,
            extra_flags: Vec::new(),
            unwind: profile.default_unwind(),
            timeout: Self::DEFAULT_TIMEOUT,
        }
    }

    pub fn with_unwind(mut self, unwind: u32) -> Self {
        self.unwind = unwind;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.unwind == 0 {
            return Err(ConfigError::ZeroUnwind);
        }
        if self.timeout.is_zero() {
            return Err(ConfigError::ZeroTimeout);
        }
        Ok(())
    }

    /// Arguments after the binary name, excluding the source path.
    pub fn arguments(&self) -> Vec<String> {
        let mut args: Vec<String> = self.profile.flags().iter().map(|s| s.to_string()).collect();
        args.extend(self.extra_flags.iter().cloned());
        args.push("--unwind".to_string());
        args.push(self.unwind.to_string());
        args
    }
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig::new("esbmc", FlagProfile::Triage)
    }
}
