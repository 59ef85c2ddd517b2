use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped by the kind of failure so front ends can map them
/// onto exit codes with [`Error::kind`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value in {op}")]
    NonFinite { op: &'static str },

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic in {path}: expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("unsupported {what} version {version} in {path}")]
    UnsupportedVersion {
        path: PathBuf,
        what: &'static str,
        version: u32,
    },

    #[error("truncated payload in {path}: expected {expected} bytes, found {actual}")]
    Truncated { path: PathBuf, expected: u64, actual: u64 },

    #[error("dimension mismatch in {path}: {detail}")]
    DimMismatch { path: PathBuf, detail: String },

    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },

    #[error("sampling rate {from} Hz is not an integer multiple of {to} Hz")]
    NonIntegerRatio { from: f64, to: f64 },

    #[error("recording too short: need {required} samples, have {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("window [{start}, {end}) is outside the recording (0..{len})")]
    WindowOutOfRange { start: usize, end: usize, len: usize },

    #[error("enjoyment rating {0} is outside 1..=9")]
    RatingOutOfRange(i64),

    #[error("empty confusion matrix")]
    EmptyConfusion,

    #[error("no BPM metadata for class {0}")]
    MissingBpm(usize),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Coarse classification of an [`Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad caller input: inconsistent arguments or shapes.
    Usage,
    /// Missing, malformed or inconsistent data on disk or in memory.
    Data,
    /// NaN/inf or divergence during computation.
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFinite { .. } | Error::Diverged { .. } => ErrorKind::Numeric,
            Error::InvalidArgument(_) | Error::NonIntegerRatio { .. } => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    /// Variant name, for diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "Shape",
            Error::NonFinite { .. } => "NonFinite",
            Error::Diverged { .. } => "Diverged",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::BadMagic { .. } => "BadMagic",
            Error::UnsupportedVersion { .. } => "UnsupportedVersion",
            Error::Truncated { .. } => "Truncated",
            Error::DimMismatch { .. } => "DimMismatch",
            Error::Malformed { .. } => "Malformed",
            Error::NonIntegerRatio { .. } => "NonIntegerRatio",
            Error::TooShort { .. } => "TooShort",
            Error::WindowOutOfRange { .. } => "WindowOutOfRange",
            Error::RatingOutOfRange(_) => "RatingOutOfRange",
            Error::EmptyConfusion => "EmptyConfusion",
            Error::MissingBpm(_) => "MissingBpm",
            Error::Io { .. } => "Io",
            Error::Json { .. } => "Json",
        }
    }

    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
