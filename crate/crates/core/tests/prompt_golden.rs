//! Rendered built-in prompts are byte-stable. Set `BMCFIX_BLESS=1` to
//! rewrite the golden files after an intended change.

use std::fs;
use std::path::PathBuf;

use bmcfix_core::verifier::{parse_verifier_output, RenderMode};
use bmcfix_core::Catalog;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn bindings_for(id: &str) -> Vec<(&'static str, String)> {
    let source = include_str!("../samples/arith_overflow.c").to_string();
    let cex = parse_verifier_output(include_str!("fixtures/esbmc_mul_gpt661.txt"));
    match id {
        "fix-code" => vec![
            ("content", source),
            (
                "counterexample_from_ESBMC",
                cex.feedback_text(RenderMode::PropertyOnly),
            ),
        ],
        "fix-compile" => vec![
            ("content", source),
            (
                "diagnostics",
                "r.c:3:5: error: implicit declaration of function 'printf'".to_string(),
            ),
        ],
        "chat-context" => vec![
            ("source_code", source),
            ("verifier_output", cex.feedback_text(RenderMode::FullTrace)),
        ],
        _ => Vec::new(),
    }
}

#[test]
fn builtin_prompts_match_golden_files() {
    let catalog = Catalog::builtin();
    let bless = std::env::var_os("BMCFIX_BLESS").is_some();
    let mut drift = Vec::new();
    for template in catalog.iter() {
        let owned = bindings_for(template.id());
        let bindings: Vec<(&str, &str)> = owned.iter().map(|(k, v)| (*k, v.as_str())).collect();
        let rendered = template.render_with(&bindings).unwrap();
        assert!(
            rendered.warnings.is_empty(),
            "{}: {:?}",
            template.id(),
            rendered.warnings
        );
        let path = golden_dir().join(format!("{}.txt", template.id()));
        if bless {
            fs::create_dir_all(golden_dir()).unwrap();
            fs::write(&path, &rendered.text).unwrap();
            continue;
        }
        let expected = fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("{}: {e} (run with BMCFIX_BLESS=1)", path.display()));
        if expected != rendered.text {
            drift.push(template.id().to_string());
        }
    }
    assert!(drift.is_empty(), "prompt text drifted: {drift:?}");
}

#[test]
fn fix_code_prompt_matches_the_published_wording() {
    let text = fs::read_to_string(golden_dir().join("fix-code.txt")).unwrap();
    assert!(text.starts_with("We have the following vulnerable code:\n--int main() {\n"));
    assert!(text.contains(
        "--. Fix it based on this:\nViolated property:\n  file gpt661.c line 5 function MD5\n"
    ));
    assert!(text.ends_with(
        ".\nAlways add header to the code,\nGive me the pure code that can\nbe compiled"
    ));
}
