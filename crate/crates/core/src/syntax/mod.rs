//! Text formats: `.dslbb` building blocks and `.dslm` models.
//!
//! Both are line oriented. Each line is lexed on its own, so a bad line
//! produces an error without disturbing the lines after it.

mod block;
mod lexer;
mod model;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use block::{parse_block, parse_block_bytes, serialize_block};
pub use model::{parse_model, parse_model_bytes, serialize_model};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: Option<PathBuf>,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
}

impl SourceSpan {
    pub fn new(line: usize, column: usize) -> Self {
        SourceSpan { file: None, line, column }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{}:", file.display())?;
        }
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Option<String>,
}

impl ParseError {
    pub(crate) fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            span: SourceSpan::new(line, column),
            message: message.into(),
            expected: None,
        }
    }

    pub(crate) fn expected(line: usize, column: usize, what: &str, found: &str) -> Self {
        ParseError {
            span: SourceSpan::new(line, column),
            message: format!("expected {what}, found {found}"),
            expected: Some(what.to_string()),
        }
    }

    pub fn with_file(mut self, file: impl Into<PathBuf>) -> Self {
        self.span.file = Some(file.into());
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Decodes UTF-8 input; invalid input yields a single error at its first
/// bad byte.
pub(crate) fn decode(bytes: &[u8]) -> Result<&str, ParseError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let valid = &bytes[..e.valid_up_to()];
        // valid prefix is UTF-8 by construction
        let prefix = std::str::from_utf8(valid).unwrap_or_default();
        let line = prefix.matches('\n').count() + 1;
        let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError::new(line, column, "input is not valid UTF-8")
    })
}
