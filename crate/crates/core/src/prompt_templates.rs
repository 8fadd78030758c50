//! Cloze templates that wrap a headline and a summary around a mask slot.
//!
//! Patterns use the placeholder syntax `{"placeholder":"text_a"}`,
//! `{"placeholder":"text_b"}` and `{"mask"}`. Quotes and spaces inside the
//! braces are optional, so `{text_a}` and `{'mask'}` also parse. Rendered
//! text has every whitespace run collapsed to a single space.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {id}: {reason}")]
    Malformed { id: u32, reason: String },
    #[error("headline is empty")]
    EmptyHeadline,
    #[error("summary is empty")]
    EmptySummary,
    #[error("mask token is empty")]
    EmptyMask,
    #[error("mask token `{0}` also occurs in the input text")]
    MaskCollision(String),
    #[error("unknown template id {0}")]
    UnknownId(u32),
    #[error("template file: {0}")]
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    TextA,
    TextB,
    Mask,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Slot(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    id: u32,
    pattern: String,
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    /// Index of the mask among the whitespace-separated tokens of `text`.
    pub mask_position: usize,
    pub template_id: u32,
}

impl RenderedPrompt {
    pub fn tokens(&self) -> Vec<String> {
        self.text.split_whitespace().map(str::to_owned).collect()
    }
}

fn parse_slot(inner: &str) -> Option<Slot> {
    let cleaned: String = inner
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '"' && *c != '\'')
        .collect();
    match cleaned.as_str() {
        "placeholder:text_a" | "text_a" => Some(Slot::TextA),
        "placeholder:text_b" | "text_b" => Some(Slot::TextB),
        "mask" => Some(Slot::Mask),
        _ => None,
    }
}

fn parse_pattern(id: u32, pattern: &str) -> Result<Vec<Piece>, TemplateError> {
    let malformed = |reason: String| TemplateError::Malformed { id, reason };
    let mut pieces = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| malformed("unclosed `{`".into()))?;
        let slot = parse_slot(&rest[open + 1..close])
            .ok_or_else(|| malformed(format!("unknown slot `{}`", &rest[open..=close])))?;
        if open > 0 {
            pieces.push(Piece::Literal(rest[..open].to_owned()));
        }
        pieces.push(Piece::Slot(slot));
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Literal(rest.to_owned()));
    }

    for (slot, name) in [(Slot::TextA, "text_a"), (Slot::TextB, "text_b"), (Slot::Mask, "mask")] {
        let count = pieces.iter().filter(|p| **p == Piece::Slot(slot)).count();
        if count != 1 {
            return Err(malformed(format!("expected exactly one `{name}` slot, found {count}")));
        }
    }
    // The mask must be its own whitespace-delimited token.
    let at = pieces
        .iter()
        .position(|p| *p == Piece::Slot(Slot::Mask))
        .expect("counted above");
    let touches = |p: Option<&Piece>, before: bool| match p {
        None => false,
        Some(Piece::Literal(s)) => {
            let edge = if before { s.chars().last() } else { s.chars().next() };
            !edge.is_some_and(char::is_whitespace)
        }
        Some(Piece::Slot(_)) => true,
    };
    if touches(at.checked_sub(1).and_then(|i| pieces.get(i)), true) || touches(pieces.get(at + 1), false) {
        return Err(malformed("mask slot must be separated from other text by whitespace".into()));
    }
    Ok(pieces)
}

/// Empty text substituted for `text_b` when detection runs on the headline alone.
pub const EMPTY_SUMMARY: &str = "";

impl PromptTemplate {
    pub fn new(id: u32, pattern: impl Into<String>) -> Result<Self, TemplateError> {
        let pattern = pattern.into();
        let pieces = parse_pattern(id, &pattern)?;
        Ok(Self { id, pattern, pieces })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn render(
        &self,
        headline: &str,
        summary: &str,
        mask_token: &str,
    ) -> Result<RenderedPrompt, TemplateError> {
        if summary.trim().is_empty() {
            return Err(TemplateError::EmptySummary);
        }
        self.render_inner(headline, summary, mask_token)
    }

    /// Renders with the summary slot left empty.
    pub fn render_headline_only(
        &self,
        headline: &str,
        mask_token: &str,
    ) -> Result<RenderedPrompt, TemplateError> {
        self.render_inner(headline, EMPTY_SUMMARY, mask_token)
    }

    fn render_inner(
        &self,
        headline: &str,
        summary: &str,
        mask_token: &str,
    ) -> Result<RenderedPrompt, TemplateError> {
        if headline.trim().is_empty() {
            return Err(TemplateError::EmptyHeadline);
        }
        let mask_token = mask_token.trim();
        if mask_token.is_empty() {
            return Err(TemplateError::EmptyMask);
        }
        if mask_token.split_whitespace().count() != 1 {
            return Err(TemplateError::EmptyMask);
        }
        let mut before = String::new();
        let mut after = String::new();
        let mut seen_mask = false;
        for piece in &self.pieces {
            let target = if seen_mask { &mut after } else { &mut before };
            match piece {
                Piece::Literal(s) => target.push_str(s),
                Piece::Slot(Slot::TextA) => target.push_str(headline),
                Piece::Slot(Slot::TextB) => target.push_str(summary),
                Piece::Slot(Slot::Mask) => seen_mask = true,
            }
        }
        let before: Vec<&str> = before.split_whitespace().collect();
        let after: Vec<&str> = after.split_whitespace().collect();
        if before.iter().chain(&after).any(|t| t.contains(mask_token)) {
            return Err(TemplateError::MaskCollision(mask_token.to_owned()));
        }
        let mask_position = before.len();
        let mut tokens = before;
        tokens.push(mask_token);
        tokens.extend(after);
        Ok(RenderedPrompt {
            text: tokens.join(" "),
            mask_position,
            template_id: self.id,
        })
    }
}

/// Free function form of [`PromptTemplate::render`].
pub fn render(
    template: &PromptTemplate,
    headline: &str,
    summary: &str,
    mask_token: &str,
) -> Result<RenderedPrompt, TemplateError> {
    template.render(headline, summary, mask_token)
}

const BUILTIN: [(u32, &str); 4] = [
    (
        1,
        r#"This title is: {"placeholder": "text_a"} This article is {"placeholder":"text_b"} and provides detailed information and analysis.
is_clickbait: {"mask"}"#,
    ),
    (
        2,
        r#"This article title is: {"placeholder": "text_a"}. The content is {"placeholder": "text_b"} and provides detailed information and analysis.
Is it clickbait? {'mask'}"#,
    ),
    (
        3,
        r#"Article Title: {"placeholder": "text_a"}, Article Content: {"placeholder": "text_b"},
is this clickbait? {"mask"}"#,
    ),
    (
        4,
        r#"This is an article about: {"placeholder": "text_a"} This article discusses {"placeholder": "text_b"} and provides detailed information and analysis.
is_clickbait: {"mask"}"#,
    ),
];

/// The four hand-written clickbait templates, ids 1 to 4.
pub fn builtin_templates() -> Vec<PromptTemplate> {
    BUILTIN
        .iter()
        .map(|&(id, p)| PromptTemplate::new(id, p).expect("builtin templates parse"))
        .collect()
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    #[serde(rename = "template", default)]
    templates: Vec<TemplateEntry>,
}

#[derive(Debug, Deserialize)]
struct TemplateEntry {
    id: u32,
    pattern: String,
}

/// Reads `[[template]]` tables with `id` and `pattern` keys.
pub fn parse_template_file(text: &str) -> Result<Vec<PromptTemplate>, TemplateError> {
    let file: TemplateFile = toml::from_str(text).map_err(|e| TemplateError::File(e.to_string()))?;
    file.templates
        .into_iter()
        .map(|e| PromptTemplate::new(e.id, e.pattern))
        .collect()
}

pub fn load_templates(path: &Path) -> Result<Vec<PromptTemplate>, TemplateError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TemplateError::File(format!("{}: {e}", path.display())))?;
    parse_template_file(&text)
}

/// Builtins plus user templates; a user template replaces a builtin with the same id.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: builtin_templates(),
        }
    }
}

impl TemplateSet {
    pub fn extend(&mut self, extra: Vec<PromptTemplate>) {
        for t in extra {
            match self.templates.iter_mut().find(|x| x.id == t.id) {
                Some(slot) => *slot = t,
                None => self.templates.push(t),
            }
        }
    }

    pub fn get(&self, id: u32) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .iter()
            .find(|t| t.id == id)
            .ok_or(TemplateError::UnknownId(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.iter()
    }
}
