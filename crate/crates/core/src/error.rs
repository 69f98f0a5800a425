//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An element, crossing or event index is outside the addressed range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// Two arrays that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Requested Hadamard order has no Sylvester construction.
    #[error("unsupported encoding order {0}: must be a power of two (Sylvester construction)")]
    UnsupportedOrder(usize),

    /// Encoding matrix failed the H·Hᵀ = n·I check.
    #[error("encoding matrix is not Hadamard: {0}")]
    NotHadamard(String),

    /// Sample rates of two signals that must agree do not.
    #[error("sample-rate mismatch: {0}")]
    SampleRateMismatch(String),

    /// Sampling too coarse for the requested operation.
    #[error("undersampled: {0}")]
    Undersampled(String),

    /// Simulation window too short to contain every echo.
    #[error("time span too short: {0}")]
    TimeSpanTooShort(String),

    /// A specification value is out of its documented domain.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// A profile never falls below the level needed to measure a width.
    #[error("unbounded profile: {0}")]
    Unbounded(String),

    /// Text parse failure (scatterer files and similar line formats).
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
