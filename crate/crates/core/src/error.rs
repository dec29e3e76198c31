use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used for process exit codes and the C ABI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: malformed line, expected `unit_id<TAB>text`")]
    MalformedLine { line: usize },
    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("duplicate unit id {id:?} (line {line})")]
    DuplicateId { id: String, line: usize },
    #[error("unit {id:?} is empty after trimming whitespace")]
    EmptyUnit { id: String },
    #[error("invalid unit id {id:?}: ids must be non-empty and free of tabs and newlines")]
    InvalidUnitId { id: String },
    #[error("unit {id:?} contains a line break")]
    LineBreakInText { id: String },
    #[error("corpora {left:?} and {right:?} share no unit ids")]
    EmptyIntersection { left: String, right: String },
    #[error("invalid fake-language marker {marker:?}: {reason}")]
    InvalidMarker { marker: String, reason: &'static str },
    #[error("marker {marker:?} already occurs in unit {id:?}")]
    MarkerCollision { marker: String, id: String },
    #[error("word {word:?} in unit {id:?} does not carry the marker {marker:?}")]
    MissingMarker {
        marker: String,
        id: String,
        word: String,
    },
    #[error("split needs dev + test ({requested}) < common ids ({available})")]
    InsufficientCommonIds { requested: usize, available: usize },
    #[error("target vocabulary size {target} is below the alphabet floor {floor}")]
    BelowAlphabetFloor { target: usize, floor: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("cannot sample {k} distinct sizes from [{n_min}, {n_max}]")]
    SampleRangeTooSmall { k: usize, n_min: usize, n_max: usize },
    #[error("no usable samples for the regression ({excluded} excluded)")]
    NoUsableSamples { excluded: usize },
    #[error("target rate {target} is unreachable for asymptote {asymptote}")]
    UnreachableRate { target: f64, asymptote: f64 },
    #[error("no reachable compression-rate marks (asymptote {asymptote})")]
    NoReachableMarks { asymptote: f64 },
    #[error("invalid compression curve: {0}")]
    InvalidCurve(String),
    #[error("embedding training produced no (center, context) pairs")]
    NoTrainingPairs,
    #[error("invalid embedding configuration: {0}")]
    InvalidEmbedConfig(String),
    #[error("embedding file {path}: {reason}")]
    EmbeddingFormat { path: PathBuf, reason: String },
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("spectrum has {len} values, need at least {k}")]
    SpectrumTooShort { len: usize, k: usize },
    #[error("compression rate {rate} must lie in (0, 1) for a log ratio")]
    RateOutOfRange { rate: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid grid configuration: {0}")]
    InvalidGridConfig(String),
    #[error("grid job failed for language {language_id:?} at size {size}: {source}")]
    Job {
        language_id: String,
        size: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NoUsableSamples { .. }
            | Error::UnreachableRate { .. }
            | Error::NoReachableMarks { .. }
            | Error::NonFinite { .. }
            | Error::ZeroVariance(_)
            | Error::RateOutOfRange { .. }
            | Error::InvalidCurve(_) => ErrorKind::Numeric,
            Error::InvalidArgument(_)
            | Error::InvalidGridConfig(_)
            | Error::InvalidEmbedConfig(_)
            | Error::SampleRangeTooSmall { .. }
            | Error::InvalidMarker { .. } => ErrorKind::Usage,
            Error::Job { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
