use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::PromptError;

/// Where a template's text comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// A published prompt, reproduced byte for byte.
    Published,
    /// Written for this tool.
    Authored,
    /// Loaded from a user override directory.
    Override,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Placeholder(String),
}

/// Text with `{name}` placeholders. `{{` and `}}` are literal braces. A `{`
/// that does not open a well-formed placeholder is kept as-is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: String,
    text: String,
    origin: Origin,
    segments: Vec<Segment>,
    required: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    /// Bindings that matched no placeholder.
    pub warnings: Vec<String>,
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn parse(text: &str) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if let Some(tail) = rest.strip_prefix("{{") {
            literal.push('{');
            rest = tail;
            continue;
        }
        if let Some(tail) = rest.strip_prefix("}}") {
            literal.push('}');
            rest = tail;
            continue;
        }
        if c == '{' {
            let body = &rest[1..];
            let name_len = body
                .char_indices()
                .find(|&(_, ch)| !is_name_char(ch))
                .map_or(body.len(), |(i, _)| i);
            let well_formed = name_len > 0
                && body.starts_with(is_name_start)
                && body[name_len..].starts_with('}');
            if well_formed {
                if !literal.is_empty() {
                    segments.push(Segment::Literal(std::mem::take(&mut literal)));
                }
                segments.push(Segment::Placeholder(body[..name_len].to_string()));
                rest = &body[name_len + 1..];
                continue;
            }
        }
        literal.push(c);
        rest = &rest[c.len_utf8()..];
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal(literal));
    }
    segments
}

impl PromptTemplate {
    pub fn new(id: impl Into<String>, text: impl Into<String>, origin: Origin) -> Self {
        let text = text.into();
        let segments = parse(&text);
        let required = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Placeholder(name) => Some(name.clone()),
                Segment::Literal(_) => None,
            })
            .collect();
        PromptTemplate {
            id: id.into(),
            text,
            origin,
            segments,
            required,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn required_bindings(&self) -> &BTreeSet<String> {
        &self.required
    }

    /// Substitute every placeholder. Binding values are inserted verbatim and
    /// never re-scanned.
    pub fn render(&self, bindings: &BTreeMap<String, String>) -> Result<Rendered, PromptError> {
        if let Some(missing) = self.required.iter().find(|n| !bindings.contains_key(*n)) {
            return Err(PromptError::MissingBinding {
                template: self.id.clone(),
                name: missing.clone(),
            });
        }
        let mut text = String::with_capacity(self.text.len());
        for segment in &self.segments {
            match segment {
                Segment::Literal(s) => text.push_str(s),
                Segment::Placeholder(name) => text.push_str(&bindings[name]),
            }
        }
        let warnings = bindings
            .keys()
            .filter(|k| !self.required.contains(*k))
            .map(|k| format!("binding `{k}` is not used by template `{}`", self.id))
            .collect();
        Ok(Rendered { text, warnings })
    }

    /// Convenience for call sites with a handful of string bindings.
    pub fn render_with(&self, bindings: &[(&str, &str)]) -> Result<Rendered, PromptError> {
        let map = bindings
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        self.render(&map)
    }
}
