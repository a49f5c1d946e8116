//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A group element failed a structural check (norm, size, determinant).
    #[error("invalid group element: {0}")]
    InvalidElement(String),

    /// A word refers to a generator outside the surface's generator range.
    #[error("malformed word: {0}")]
    MalformedWord(String),

    /// A point does not satisfy the defining equations of the stratum it was
    /// claimed to lie in.
    #[error("not in stratum: {0}")]
    NotInStratum(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A diagram move was requested with indices or data it cannot accept.
    #[error("invalid move: {0}")]
    InvalidMove(String),

    /// The smoothness condition for a requested stratum fails, so the solver
    /// refuses to run on it.
    #[error("smoothness condition violated: {0}")]
    Smoothness(String),

    /// A construction only defined near a distinguished point was asked for
    /// data outside its neighborhood of validity.
    #[error("outside neighborhood of validity: {0}")]
    OutOfNeighborhood(String),

    /// Matrix or tuple shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Bordisms whose composite is not supported.
    #[error("unsupported composition: {0}")]
    UnsupportedComposition(String),

    /// Bad run configuration (thread counts, start counts, tolerances).
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
