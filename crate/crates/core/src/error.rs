use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the discovery and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported audio format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },

    #[error("signal too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error(
        "dimension mismatch in {path} line {line}: expected {expected} columns, found {found}"
    )]
    DimensionMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("malformed line {line} in {path}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("overlapping intervals for file {file_id} in {path}: [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingIntervals {
        path: PathBuf,
        file_id: String,
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },

    #[error("unknown file id {file_id}{}", .line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    UnknownFile {
        file_id: String,
        line: Option<usize>,
    },

    #[error("empty pair set")]
    EmptyPairSet,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("{stage} failed for {file}: {source}")]
    Stage {
        stage: &'static str,
        file: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str, file: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            file: file.into(),
            source: Box::new(self),
        }
    }
}
