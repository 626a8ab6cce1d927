use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("artifact segment has zero RMS")]
    DegenerateArtifact,

    #[error("clean segment has zero RMS")]
    DegenerateClean,

    #[error("reference segment has zero RMS")]
    DegenerateTruth,

    #[error("segment length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),

    #[error("segment length {0} is too short")]
    TooShort(usize),

    #[error("count must be at least 1, got {0}")]
    InvalidCount(usize),

    #[error("segment has zero span (max == min)")]
    DegenerateSpan,

    #[error("non-finite sample at index {0}")]
    NonFinite(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("batch normalization needs at least 2 positions per channel, got {0}")]
    DegenerateBatch(usize),

    #[error("pooling needs an even length, got {0}")]
    OddLength(usize),

    #[error("dropout probability must lie in [0, 1), got {0}")]
    InvalidProbability(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("window {window} exceeds signal length {len}")]
    WindowTooLarge { window: usize, len: usize },

    #[error("FIR tap count must be odd and >= 1, got {0}")]
    InvalidTaps(usize),

    #[error("invalid targeting parameter: {0}")]
    InvalidParams(String),

    #[error("no calibration statistics for level {0}")]
    MissingCalibration(&'static str),

    #[error("missing model: {0}")]
    MissingModels(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
