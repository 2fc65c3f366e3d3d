use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::template::{Origin, PromptTemplate};
use super::PromptError;

pub const GEN_C_SAMPLE: &str = "gen-c-sample";
pub const FIX_CODE: &str = "fix-code";
pub const FIX_SYSTEM: &str = "fix-system";
pub const FIX_COMPILE: &str = "fix-compile";
pub const CHAT_SYSTEM: &str = "chat-system";
pub const CHAT_CONTEXT: &str = "chat-context";
pub const CHAT_INITIAL: &str = "chat-initial";

const GEN_C_SAMPLE_TEXT: &str = "Generate a minimum of 10 and a maximum of 50 lines of C code. \
Use at least two functions. Use strings, arrays, bit manipulations, and string manipulations \
inside the code. Be creative! Always include every necessary header. Only give me the code \
without any explanation. No comment in the code.";

const FIX_CODE_TEXT: &str = "We have the following vulnerable code:
--{content}--. Fix it based on this:
{counterexample_from_ESBMC}.
Always add header to the code,
Give me the pure code that can
be compiled";

const FIX_COMPILE_TEXT: &str = "We have the following C code that does not compile:
--{content}--. Fix it based on these compiler errors:
{diagnostics}.
Always add header to the code,
Give me the pure code that can
be compiled";

const FIX_SYSTEM_TEXT: &str = "\
You are a C program repair engine that fixes vulnerabilities reported by a bounded model checker.
You shall respond with the complete corrected C source code only.
You shall place the code inside a single fenced code block.
You shall not add explanations or acknowledgements outside the code block.
You shall fix the violation named in the verifier output while preserving the intended behaviour of the program.
You shall keep every existing function and include every necessary header.
You shall not delete the code that triggers the violation as a way of hiding it.
You shall add bounds checks, NULL checks and wider integer types where the violation requires them.
You shall use the verifier output of each failed attempt to correct your previous answer.
Reply with OK if you understand these instructions.";

const CHAT_SYSTEM_TEXT: &str = "\
You are a software security assistant that explains bounded model checker results for C programs.
You shall answer questions about the source code and the verifier output provided in this conversation.
You shall treat the verifier output as ground truth because every reported violation is reachable.
You shall identify the exact line, variable and operation responsible for a reported violation.
You shall explain the root cause in plain and direct terms.
You shall keep answers short and technical.
You shall not invent violations that the verifier did not report.
You shall not claim that code is safe when the verifier reports a violation.
You shall not discuss topics unrelated to the code under review.
You shall return complete C code inside a single fenced code block when asked for corrected code.
Reply with OK if you understand these instructions.";

const CHAT_CONTEXT_TEXT: &str = "\
The source code under review is:
```c
{source_code}
```
The bounded model checker produced this output:
{verifier_output}";

const CHAT_INITIAL_TEXT: &str = "\
Walk me through the verifier output for this program. \
Name the violated property, the line of code that triggers it, and why it occurs.";

/// Immutable set of prompt templates keyed by id.
#[derive(Debug, Clone)]
pub struct Catalog {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Catalog {
    pub fn builtin() -> Self {
        let entries = [
            (GEN_C_SAMPLE, GEN_C_SAMPLE_TEXT, Origin::Published),
            (FIX_CODE, FIX_CODE_TEXT, Origin::Published),
            (FIX_SYSTEM, FIX_SYSTEM_TEXT, Origin::Authored),
            (FIX_COMPILE, FIX_COMPILE_TEXT, Origin::Authored),
            (CHAT_SYSTEM, CHAT_SYSTEM_TEXT, Origin::Authored),
            (CHAT_CONTEXT, CHAT_CONTEXT_TEXT, Origin::Authored),
            (CHAT_INITIAL, CHAT_INITIAL_TEXT, Origin::Authored),
        ];
        Catalog {
            templates: entries
                .into_iter()
                .map(|(id, text, origin)| (id.to_string(), PromptTemplate::new(id, text, origin)))
                .collect(),
        }
    }

    /// Builtins, with `<id>.txt` files from `dir` replacing or adding templates.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut catalog = Catalog::builtin();
        let entries = fs::read_dir(dir).map_err(|e| PromptError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        for entry in entries {
            let path = entry
                .map_err(|e| PromptError::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?
                .path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.clone(),
                source: e,
            })?;
            // editors add a trailing newline; templates never end with one
            let text = text.strip_suffix('\n').unwrap_or(&text);
            catalog.insert(PromptTemplate::new(id, text, Origin::Override));
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id().to_string(), template);
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::builtin()
    }
}
