use std::collections::BTreeMap;
use std::fs;
use std::time::Instant;

use super::{
    compile_gate, extract_code, CompileResult, Compiler, FixOptions, RepairAttempt, RepairError,
    RepairObserver, RepairResult, RepairStatus,
};
use crate::llm::{ChatThread, ThreadFactory};
use crate::prompts::{Catalog, FIX_CODE, FIX_COMPILE, FIX_SYSTEM};
use crate::verifier::{counterexample_to_prompt_text, VerificationOutcome, Verifier};

/// Verdict of the loop's oracle on one candidate.
struct Checked<O> {
    outcome: O,
    accepted: bool,
    feedback: String,
}

struct LoopEnd<O> {
    status: RepairStatus,
    attempts: Vec<RepairAttempt<O>>,
    final_code: Option<String>,
    abort_reason: Option<String>,
}

fn seed(
    thread: &mut ChatThread,
    catalog: &Catalog,
    initial_prompt: String,
    observer: &mut dyn RepairObserver<impl Sized>,
) -> Result<(), RepairError> {
    let system = catalog.get(FIX_SYSTEM)?.render(&BTreeMap::new())?.text;
    thread.push_system(system)?;
    observer.message(thread.messages().last().expect("just pushed"));
    thread.push_user(initial_prompt)?;
    observer.message(thread.messages().last().expect("just pushed"));
    Ok(())
}

/// generate → extract → check, at most `max_attempts` times. Feedback for a
/// rejected candidate is appended as a user message; the model is only called
/// by `generate`.
fn run_loop<O>(
    thread: &mut ChatThread,
    max_attempts: usize,
    observer: &mut dyn RepairObserver<O>,
    mut check: impl FnMut(usize, &str) -> Result<Checked<O>, RepairError>,
) -> Result<LoopEnd<O>, RepairError> {
    let mut attempts = Vec::with_capacity(max_attempts);
    for index in 1..=max_attempts {
        let started = Instant::now();
        let reply = match thread.generate() {
            Ok(reply) => reply,
            Err(e) => {
                return Ok(LoopEnd {
                    status: RepairStatus::Aborted,
                    attempts,
                    final_code: None,
                    abort_reason: Some(e.to_string()),
                })
            }
        };
        observer.message(&reply);
        let code = extract_code(&reply.content).to_string();
        let checked = check(index, &code)?;
        let attempt = RepairAttempt {
            index,
            raw_response: reply.content,
            extracted_code: code,
            outcome: checked.outcome,
            duration: started.elapsed(),
        };
        observer.attempt(&attempt);
        if checked.accepted {
            let final_code = Some(attempt.extracted_code.clone());
            attempts.push(attempt);
            return Ok(LoopEnd {
                status: RepairStatus::Fixed,
                attempts,
                final_code,
                abort_reason: None,
            });
        }
        attempts.push(attempt);
        thread.push_user(checked.feedback)?;
        observer.message(thread.messages().last().expect("just pushed"));
    }
    Ok(LoopEnd {
        status: RepairStatus::Exhausted,
        attempts,
        final_code: None,
        abort_reason: None,
    })
}

/// Counterexample-guided repair of a falsified program.
///
/// Each candidate is written to `<session-dir>/attempt-<k>.c` and re-checked
/// by `verifier`; only a `Successful` verdict from that run ends the loop as
/// fixed. Verifier tool errors count as failed attempts. A model failure
/// ends the loop as aborted, keeping the attempts made so far.
pub fn fix_code(
    source: &str,
    initial_outcome: &VerificationOutcome,
    verifier: &dyn Verifier,
    threads: &ThreadFactory,
    catalog: &Catalog,
    options: &FixOptions,
    observer: &mut dyn RepairObserver<VerificationOutcome>,
) -> Result<RepairResult<VerificationOutcome>, RepairError> {
    if options.max_attempts == 0 {
        return Err(RepairError::ZeroAttempts);
    }
    let VerificationOutcome::Failed(cex) = initial_outcome else {
        return Err(RepairError::NotFalsified(initial_outcome.label()));
    };

    let mut builder = tempfile::Builder::new();
    builder.prefix("bmcfix-session-");
    let session = match &options.session_parent {
        Some(parent) => {
            fs::create_dir_all(parent)?;
            builder.tempdir_in(parent)?
        }
        None => builder.tempdir()?,
    };

    let mut thread = threads.thread()?;
    let counterexample = counterexample_to_prompt_text(cex, options.feedback);
    let initial_prompt = catalog
        .get(FIX_CODE)?
        .render_with(&[
            ("content", source),
            ("counterexample_from_ESBMC", &counterexample),
        ])?
        .text;
    seed(&mut thread, catalog, initial_prompt, observer)?;

    let end = run_loop(
        &mut thread,
        options.max_attempts,
        observer,
        |index, code| {
            let path = session.path().join(format!("attempt-{index}.c"));
            fs::write(&path, code)?;
            let outcome = verifier.verify(&path)?;
            Ok(Checked {
                accepted: outcome.is_successful(),
                feedback: outcome.feedback_text(options.feedback),
                outcome,
            })
        },
    )?;

    let artifacts_dir = if end.status == RepairStatus::Fixed && !options.keep_artifacts {
        session.close()?;
        None
    } else {
        Some(session.keep())
    };
    Ok(RepairResult {
        status: end.status,
        attempts: end.attempts,
        final_code: end.final_code,
        messages: thread.into_messages(),
        artifacts_dir,
        abort_reason: end.abort_reason,
    })
}

/// Drive `source` to a clean compile using compiler diagnostics as feedback.
/// Source that already compiles is returned as fixed without any model call.
pub fn repair_compilation(
    source: &str,
    compiler: &Compiler,
    threads: &ThreadFactory,
    catalog: &Catalog,
    max_attempts: usize,
    observer: &mut dyn RepairObserver<CompileResult>,
) -> Result<RepairResult<CompileResult>, RepairError> {
    if max_attempts == 0 {
        return Err(RepairError::ZeroAttempts);
    }
    let first = compile_gate(source, compiler)?;
    if first.ok {
        return Ok(RepairResult {
            status: RepairStatus::Fixed,
            attempts: Vec::new(),
            final_code: Some(source.to_string()),
            messages: Vec::new(),
            artifacts_dir: None,
            abort_reason: None,
        });
    }

    let mut thread = threads.thread()?;
    let initial_prompt = catalog
        .get(FIX_COMPILE)?
        .render_with(&[
            ("content", source),
            ("diagnostics", &diagnostics_text(&first)),
        ])?
        .text;
    seed(&mut thread, catalog, initial_prompt, observer)?;

    let end = run_loop(&mut thread, max_attempts, observer, |_, code| {
        let result = compile_gate(code, compiler)?;
        Ok(Checked {
            accepted: result.ok,
            feedback: diagnostics_text(&result),
            outcome: result,
        })
    })?;
    Ok(RepairResult {
        status: end.status,
        attempts: end.attempts,
        final_code: end.final_code,
        messages: thread.into_messages(),
        artifacts_dir: None,
        abort_reason: end.abort_reason,
    })
}

fn diagnostics_text(result: &CompileResult) -> String {
    if result.diagnostics.trim().is_empty() {
        format!(
            "compilation failed ({}) without diagnostics",
            result.exit_info
        )
    } else {
        result.diagnostics.clone()
    }
}

#[cfg(test)]
mod tests {
    use std::path::{Path, PathBuf};
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::llm::{LlmError, Role, ScriptedBackend};
    use crate::repair::NoObserver;
    use crate::verifier::{parse_verifier_output, VerifierError};

    const SCANF: &str = include_str!("../../tests/fixtures/esbmc_scanf_r.txt");
    const MUL: &str = include_str!("../../tests/fixtures/esbmc_mul_gpt661.txt");

    /// Stub checker: code containing `GOOD` verifies, code containing `CRASH`
    /// is a tool error, anything else fails with the scanf counterexample.
    #[derive(Default)]
    struct StubVerifier {
        calls: Mutex<Vec<(PathBuf, String)>>,
        good_marker: &'static str,
    }

    impl StubVerifier {
        fn new(good_marker: &'static str) -> Self {
            StubVerifier {
                calls: Mutex::default(),
                good_marker,
            }
        }
        fn calls(&self) -> usize {
            self.calls.lock().unwrap().len()
        }
    }

    impl Verifier for StubVerifier {
        fn verify(&self, source: &Path) -> Result<VerificationOutcome, VerifierError> {
            let code = fs::read_to_string(source).unwrap();
            self.calls
                .lock()
                .unwrap()
                .push((source.to_path_buf(), code.clone()));
            Ok(if code.contains(self.good_marker) {
                VerificationOutcome::Successful
            } else if code.contains("CRASH") {
                VerificationOutcome::ToolError {
                    detail: "solver crashed".into(),
                    exit_info: "signal 11".into(),
                }
            } else {
                parse_verifier_output(SCANF)
            })
        }
    }

    fn fence(code: &str) -> String {
        format!("Certainly! Here is the fix:\n```c\n{code}\n```")
    }

    fn factory(replies: Vec<String>) -> (ThreadFactory, Arc<ScriptedBackend>) {
        let backend = Arc::new(ScriptedBackend::new(replies));
        (
            ThreadFactory::new(backend.clone(), "test-model", 0.0),
            backend,
        )
    }

    fn initial() -> VerificationOutcome {
        parse_verifier_output(SCANF)
    }

    fn options(dir: &Path) -> FixOptions {
        FixOptions {
            session_parent: Some(dir.to_path_buf()),
            ..FixOptions::default()
        }
    }

    fn feedback_count(messages: &[crate::llm::Message]) -> usize {
        // every user message after the initial prompt is verifier feedback
        messages.iter().filter(|m| m.role == Role::User).count() - 1
    }

    #[test]
    fn fixed_on_third_attempt() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, backend) = factory(vec![fence("bad 1"), fence("bad 2"), fence("GOOD")]);
        let verifier = StubVerifier::new("GOOD");
        let result = fix_code(
            "src",
            &initial(),
            &verifier,
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(result.status, RepairStatus::Fixed);
        assert_eq!(result.attempts.len(), 3);
        assert_eq!(backend.calls(), 3);
        assert_eq!(verifier.calls(), 3);
        assert_eq!(feedback_count(&result.messages), 2);
        assert_eq!(result.final_code.as_deref(), Some("GOOD\n"));
        assert_eq!(result.attempts.last().unwrap().extracted_code, "GOOD\n");
        // the verifier saw the final code itself
        assert_eq!(verifier.calls.lock().unwrap()[2].1, "GOOD\n");
        // session dir removed on success
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        assert!(result.artifacts_dir.is_none());
    }

    #[test]
    fn exhausted_after_max_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, backend) = factory((0..20).map(|i| fence(&format!("bad {i}"))).collect());
        let verifier = StubVerifier::new("GOOD");
        let result = fix_code(
            "src",
            &initial(),
            &verifier,
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(result.status, RepairStatus::Exhausted);
        assert_eq!(result.attempts.len(), 10);
        assert_eq!(backend.calls(), 10);
        assert_eq!(verifier.calls(), 10);
        assert!(result.final_code.is_none());
        // system + initial + 2 per failed attempt
        assert_eq!(result.messages.len(), 2 + 2 * 10);
        let kept = result.artifacts_dir.unwrap();
        assert!(kept.join("attempt-1.c").exists());
        assert!(kept.join("attempt-10.c").exists());
        assert_eq!(
            fs::read_to_string(kept.join("attempt-4.c")).unwrap(),
            "bad 3\n"
        );
    }

    #[test]
    fn thread_is_seeded_with_system_and_fix_prompt() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, _) = factory(vec![fence("GOOD")]);
        let result = fix_code(
            "int main(){}",
            &initial(),
            &StubVerifier::new("GOOD"),
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        let m = &result.messages;
        assert_eq!(m[0].role, Role::System);
        assert_eq!(m[1].role, Role::User);
        assert!(m[1]
            .content
            .starts_with("We have the following vulnerable code:\n--int main(){}--."));
        assert!(m[1].content.contains("buffer overflow on scanf"));
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn feedback_is_the_latest_verifier_output() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, _) = factory(vec![fence("bad"), fence("GOOD")]);
        let result = fix_code(
            "src",
            &parse_verifier_output(MUL),
            &StubVerifier::new("GOOD"),
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        // initial prompt carries the mul counterexample, feedback the scanf one
        assert!(result.messages[1]
            .content
            .contains("arithmetic overflow on mul"));
        assert_eq!(result.messages[3].content, SCANF);
    }

    #[test]
    fn listing_one_fixed_first_try() {
        let dir = tempfile::tempdir().unwrap();
        let original = include_str!("../../samples/arith_overflow.c");
        let corrected = include_str!("../../samples/arith_overflow_fixed.c");
        let mul_test_c = parse_verifier_output(
            "Violated property:\n  file test.c line 4 function main\n  arithmetic overflow on mul\n  !overflow(\"*\", y, y)\n\nVERIFICATION FAILED\n",
        );
        let (threads, _) = factory(vec![format!("```\n{corrected}```")]);
        let result = fix_code(
            original,
            &mul_test_c,
            &StubVerifier::new("long long int z = y * y;"),
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        assert!(result.is_fixed());
        assert_eq!(result.attempts.len(), 1);
        assert_eq!(
            result.final_code.as_deref(),
            Some(format!("\n{corrected}").as_str())
        );
    }

    #[test]
    fn tool_errors_count_as_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, backend) = factory(vec![fence("CRASH"), fence("GOOD")]);
        let result = fix_code(
            "src",
            &initial(),
            &StubVerifier::new("GOOD"),
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        assert!(result.is_fixed());
        assert_eq!(backend.calls(), 2);
        assert!(matches!(
            result.attempts[0].outcome,
            VerificationOutcome::ToolError { .. }
        ));
        assert!(result.messages[3].content.contains("solver crashed"));
    }

    #[test]
    fn backend_failure_aborts_with_partial_history() {
        let dir = tempfile::tempdir().unwrap();
        // two replies, then the script runs dry
        let (threads, _) = factory(vec![fence("bad"), fence("bad")]);
        let result = fix_code(
            "src",
            &initial(),
            &StubVerifier::new("GOOD"),
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(result.status, RepairStatus::Aborted);
        assert_eq!(result.attempts.len(), 2);
        assert!(result.abort_reason.unwrap().contains("unscripted"));
        assert!(result.artifacts_dir.is_some());
    }

    #[test]
    fn preconditions() {
        let (threads, _) = factory(vec![]);
        let v = StubVerifier::new("GOOD");
        let c = Catalog::builtin();
        let err = fix_code(
            "src",
            &VerificationOutcome::Successful,
            &v,
            &threads,
            &c,
            &FixOptions::default(),
            &mut NoObserver,
        )
        .unwrap_err();
        assert!(matches!(err, RepairError::NotFalsified("successful")));
        let zero = FixOptions {
            max_attempts: 0,
            ..FixOptions::default()
        };
        assert!(matches!(
            fix_code("s", &initial(), &v, &threads, &c, &zero, &mut NoObserver),
            Err(RepairError::ZeroAttempts)
        ));
    }

    #[test]
    fn property_only_feedback_mode() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, _) = factory(vec![fence("bad"), fence("GOOD")]);
        let opts = FixOptions {
            feedback: crate::verifier::RenderMode::PropertyOnly,
            ..options(dir.path())
        };
        let result = fix_code(
            "src",
            &initial(),
            &StubVerifier::new("GOOD"),
            &threads,
            &Catalog::builtin(),
            &opts,
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(
            result.messages[3].content,
            "Violated property:\n  file r.c line 8 function main\n  buffer overflow on scanf\n  0"
        );
    }

    struct Recorder(Vec<String>);

    impl RepairObserver<VerificationOutcome> for Recorder {
        fn message(&mut self, m: &crate::llm::Message) {
            self.0.push(format!("message:{}", m.role));
        }
        fn attempt(&mut self, a: &RepairAttempt<VerificationOutcome>) {
            self.0
                .push(format!("attempt:{}:{}", a.index, a.outcome.label()));
        }
    }

    #[test]
    fn observer_sees_events_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let (threads, _) = factory(vec![fence("bad"), fence("GOOD")]);
        let mut rec = Recorder(Vec::new());
        fix_code(
            "src",
            &initial(),
            &StubVerifier::new("GOOD"),
            &threads,
            &Catalog::builtin(),
            &options(dir.path()),
            &mut rec,
        )
        .unwrap();
        assert_eq!(
            rec.0,
            vec![
                "message:system",
                "message:user",
                "message:assistant",
                "attempt:1:failed",
                "message:user",
                "message:assistant",
                "attempt:2:successful",
            ]
        );
    }

    const NEEDS_MATH: &str = "#include <stdio.h>\nint main(void) {\n    double r = sqrt(2.0);\n    printf(\"%f\\n\", r);\n    return 0;\n}\n";

    #[test]
    fn compile_repair_adds_missing_header() {
        let fixed = format!("#include <math.h>\n{NEEDS_MATH}");
        let (threads, backend) = factory(vec![fence(&fixed)]);
        let result = repair_compilation(
            NEEDS_MATH,
            &Compiler::default(),
            &threads,
            &Catalog::builtin(),
            3,
            &mut NoObserver,
        )
        .unwrap();
        assert!(result.is_fixed());
        assert_eq!(result.attempts.len(), 1);
        assert_eq!(backend.calls(), 1);
        assert!(result.messages[1].content.contains("implicit declaration"));
        assert!(result.final_code.unwrap().starts_with("#include <math.h>"));
    }

    #[test]
    fn compile_repair_gives_up() {
        let (threads, backend) = factory(vec![fence(NEEDS_MATH); 5]);
        let result = repair_compilation(
            NEEDS_MATH,
            &Compiler::default(),
            &threads,
            &Catalog::builtin(),
            3,
            &mut NoObserver,
        )
        .unwrap();
        assert_eq!(result.status, RepairStatus::Exhausted);
        assert_eq!(result.attempts.len(), 3);
        assert_eq!(backend.calls(), 3);
        assert!(result.attempts.iter().all(|a| !a.outcome.ok));
    }

    #[test]
    fn compile_repair_short_circuits() {
        let (threads, backend) = factory(vec![]);
        let result = repair_compilation(
            "int main(void){return 0;}\n",
            &Compiler::default(),
            &threads,
            &Catalog::builtin(),
            3,
            &mut NoObserver,
        )
        .unwrap();
        assert!(result.is_fixed());
        assert!(result.attempts.is_empty());
        assert_eq!(backend.calls(), 0);
    }

    #[test]
    fn llm_errors_convert() {
        let e: RepairError = LlmError::EmptyPrompt.into();
        assert!(matches!(e, RepairError::Llm(_)));
    }
}
