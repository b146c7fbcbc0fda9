use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown label code {0}")]
    UnknownLabel(u8),

    #[error("non-finite sample at trial {trial}, channel {channel}, sample {sample}")]
    NonFinite {
        trial: usize,
        channel: usize,
        sample: usize,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("window [{start}, {end}) exceeds recording of {len} samples")]
    OutOfBounds { start: usize, end: usize, len: usize },

    #[error("degenerate scale on channel `{0}` (q95 - q5 == 0)")]
    DegenerateScale(String),

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
