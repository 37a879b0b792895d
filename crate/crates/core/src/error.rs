use std::fmt;

use crate::doc_model::StreamViolation;
use crate::report::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in the source text a tokenizer error occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextPosition {
    /// Byte offset into the input.
    pub offset: usize,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, counted in characters.
    pub column: usize,
}

impl TextPosition {
    pub(crate) fn locate(input: &str, offset: usize) -> Self {
        let before = &input[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = input[line_start..offset].chars().count() + 1;
        TextPosition {
            offset,
            line,
            column,
        }
    }
}

impl fmt::Display for TextPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed tag at {at}: {reason}")]
    MalformedTag { at: TextPosition, reason: String },

    #[error("end tag </{found}> at {at} does not match open element <{expected}>")]
    MismatchedEndTag {
        at: TextPosition,
        expected: String,
        found: String,
    },

    #[error("end tag </{name}> at {at} has no open element")]
    UnopenedEndTag { at: TextPosition, name: String },

    #[error("end milestone for `{id}` at {at} has no preceding start milestone")]
    UnmatchedEnd { at: TextPosition, id: String },

    #[error("invalid token stream: {0}")]
    InvalidStream(ValidationReport<StreamViolation>),

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("construction invariant broken: {0}")]
    Internal(String),

    #[error("document digest mismatch: expected {expected}, found {found}")]
    DigestMismatch { expected: String, found: String },

    #[error("malformed file at line {line}: {reason}")]
    MalformedFile { line: usize, reason: String },

    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
