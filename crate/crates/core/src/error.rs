//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Vector or weight lengths do not agree.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// Weight sequence violates positivity or monotonicity, or the weight
    /// constant is out of range.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// A scalar parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Array shapes do not match the declared problem dimensions.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A brute-force oracle was asked for a dimension above its cap.
    #[error("oracle dimension cap exceeded: {0}")]
    DimCap(String),

    /// The stacked design does not have full column rank.
    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    /// Solver-level failure (bad options, non-finite values).
    #[error("solver: {0}")]
    Solver(String),

    /// Malformed experiment or fit configuration.
    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
