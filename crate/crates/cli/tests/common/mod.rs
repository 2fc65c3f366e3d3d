#![allow(dead_code)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use bmcfix_cli::{AppConfig, Session};
use bmcfix_core::llm::ScriptedBackend;
use bmcfix_core::verifier::{EsbmcVerifier, FlagProfile, VerifierConfig};

pub fn core_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core")
}

pub fn sample(name: &str) -> String {
    fs::read_to_string(core_dir().join("samples").join(name)).unwrap()
}

pub fn fixture_path(name: &str) -> PathBuf {
    core_dir()
        .join("tests/fixtures")
        .join(name)
        .canonicalize()
        .unwrap()
}

pub fn write_executable(path: &Path, body: &str) {
    fs::write(path, format!("#!/bin/sh\n{body}")).unwrap();
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

/// A stand-in checker: a source containing `%9s` verifies, anything else
/// fails with the scanf counterexample.
pub fn stub_verifier(dir: &Path) -> PathBuf {
    let path = dir.join("stub-esbmc");
    let cex = fixture_path("esbmc_scanf_r.txt");
    write_executable(
        &path,
        &format!(
            "for last; do :; done\n\
             if grep -q '%9s' \"$last\"; then echo 'VERIFICATION SUCCESSFUL'; exit 0; fi\n\
             cat '{}'\necho\necho 'VERIFICATION FAILED'\nexit 1\n",
            cex.display()
        ),
    );
    path
}

/// Checker that never answers.
pub fn sleeping_verifier(dir: &Path) -> PathBuf {
    let path = dir.join("slow-esbmc");
    write_executable(&path, "sleep 30\n");
    path
}

/// Checker that crashes without printing a verdict.
pub fn crashing_verifier(dir: &Path) -> PathBuf {
    let path = dir.join("crash-esbmc");
    write_executable(&path, "echo 'segmentation fault' >&2\nexit 139\n");
    path
}

pub fn verifier(binary: &Path) -> EsbmcVerifier {
    EsbmcVerifier::new(VerifierConfig::new(binary, FlagProfile::Triage)).unwrap()
}

pub fn fenced(code: &str) -> String {
    format!("Sure! Here is the corrected code:\n```c\n{code}```\n")
}

/// The scanf sample with its conversion bounded.
pub fn scanf_fix() -> String {
    sample("scanf_overflow.c").replace("scanf(\"%s\", word);", "scanf(\"%9s\", word);")
}

pub fn scripted_session(replies: Vec<String>) -> (Session, Arc<ScriptedBackend>) {
    scripted_session_with(AppConfig::default(), replies)
}

pub fn scripted_session_with(
    config: AppConfig,
    replies: Vec<String>,
) -> (Session, Arc<ScriptedBackend>) {
    let backend = Arc::new(ScriptedBackend::new(replies));
    (Session::new(config, backend.clone()).unwrap(), backend)
}

pub fn script_file(dir: &Path, replies: &[String]) -> PathBuf {
    let path = dir.join("script.json");
    fs::write(&path, serde_json::to_string(replies).unwrap()).unwrap();
    path
}
