use std::path::PathBuf;

use thiserror::Error;

/// Coarse error category used by callers (e.g. the CLI) to map failures to
/// exit codes without matching on every variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Io,
    Data,
    Backend,
    Empty,
}

/// Two merged relationships with the same key but different gains.
#[derive(Debug, Error)]
#[error(
    "conflicting gain for relationship {from} -> {to} ({rel_type}): \
     {gain_a} dB (chunks {chunks_a:?}) vs {gain_b} dB (chunks {chunks_b:?})"
)]
pub struct GainConflict {
    pub from: String,
    pub to: String,
    pub rel_type: String,
    pub gain_a: f64,
    pub gain_b: f64,
    pub chunks_a: Vec<usize>,
    pub chunks_b: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing or invalid CSV header: {0}")]
    BadHeader(String),

    #[error("malformed CKM row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("non-finite value in CKM row {row}, column {column}")]
    NonFinite { row: usize, column: String },

    #[error("line {line} has {tokens} tokens, exceeding chunk size {chunk_size}: {text:?}")]
    LineTooLong {
        line: usize,
        tokens: usize,
        chunk_size: usize,
        text: String,
    },

    #[error("chunk {chunk}, line {line}: does not match the document grammar: {text:?}")]
    GrammarMismatch {
        chunk: usize,
        line: usize,
        text: String,
    },

    #[error(transparent)]
    GainConflict(Box<GainConflict>),

    #[error("relationship {from} -> {to} references missing entity {missing}")]
    DanglingRelationship {
        from: String,
        to: String,
        missing: String,
    },

    #[error("entity {name}: cannot parse coordinate attribute {value:?}")]
    BadCoordinate { name: String, value: String },

    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("config error: {}", issues.join("; "))]
    Config { issues: Vec<String> },

    #[error("backend error: {0}")]
    Backend(String),

    #[error("backend response contained zero parseable records")]
    NoParseableRecords,

    #[error("empty result: {0}")]
    Empty(String),

    #[error("graph file format_version {found} unsupported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupted graph file: {0}")]
    Corrupt(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(issues: Vec<String>) -> Self {
        Error::Config { issues }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } => ErrorCategory::Config,
            Error::Io { .. } => ErrorCategory::Io,
            Error::Backend(_) | Error::NoParseableRecords => ErrorCategory::Backend,
            Error::Empty(_) => ErrorCategory::Empty,
            _ => ErrorCategory::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
