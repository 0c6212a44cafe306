use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lag {h} must be smaller than the series length {n}")]
    LagTooLarge { h: usize, n: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty data")]
    EmptyData,

    #[error("bracketing cover needs {needed} brackets, cap is {cap}")]
    CoverTooLarge { needed: f64, cap: usize },

    /// The bracketing integral does not converge, so the modulus bound has no
    /// hypothesis to stand on.
    #[error(
        "bracketing integral diverges: integrand behaves like x^({exponent}) near 0 \
         (gamma = {gamma}, Q = {q}); choose a larger Q or gamma"
    )]
    DivergentIntegral { exponent: f64, gamma: f64, q: u32 },

    #[error("indicator coupling configuration: {0}")]
    CouplingConfig(String),

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
