use std::path::PathBuf;

use thiserror::Error;

/// Parameter of a gammachirp channel that receives gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnedParam {
    Chirp,
    Bandwidth,
    Order,
}

impl std::fmt::Display for LearnedParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LearnedParam::Chirp => "chirp",
            LearnedParam::Bandwidth => "bandwidth_scale",
            LearnedParam::Order => "order",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate filter: l2 norm {norm:e} underflows")]
    DegenerateFilter { norm: f64 },

    #[error("signal of {len} samples is shorter than the filter length {filter_len}; pad it first")]
    SignalTooShort { len: usize, filter_len: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("coefficient index {index} out of range for {num_atoms} atoms")]
    IndexOutOfRange { index: usize, num_atoms: usize },

    #[error("LCA diverged: non-finite membrane potential at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("non-finite gradient for channel {channel}, parameter {param}")]
    NonFiniteGradient { channel: usize, param: LearnedParam },

    #[error("forward trace holds {actual} iterations, backward needs {expected}")]
    IncompleteTrace { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("all signals in a batch failed to encode")]
    AllSkipped,

    #[error("{path}: malformed WAV header: {reason}")]
    MalformedWav { path: PathBuf, reason: String },

    #[error("{path}: unsupported WAV encoding: {reason}")]
    UnsupportedWav { path: PathBuf, reason: String },

    #[error("{path}: sample rate {found} Hz does not match the configured {expected} Hz")]
    SampleRateMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than from inputs or I/O.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonFiniteGradient { .. }
                | Error::DegenerateFilter { .. }
                | Error::AllSkipped
        )
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Json(_)
                | Error::MalformedWav { .. }
                | Error::UnsupportedWav { .. }
                | Error::SampleRateMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
