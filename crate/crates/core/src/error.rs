use thiserror::Error;

pub type Result<T> = std::result::Result<T, SabreError>;

#[derive(Debug, Error)]
pub enum SabreError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },

    #[error("matrix must have at least one row")]
    EmptyMatrix,

    #[error("positions are not a bijection of 1..={n}")]
    NotBijective { n: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid comparison matrix at ({i}, {j}): {reason}")]
    InvalidComparison { i: usize, j: usize, reason: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("subset too small: need at least {needed} indices, got {got}")]
    SubsetTooSmall { needed: usize, got: usize },

    #[error("no index has two components; orientation is undefined")]
    NoBisection,

    #[error("{0}")]
    Guard(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SabreError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        SabreError::InvalidParameter(msg.into())
    }

    /// True for failures of the filesystem rather than of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, SabreError::Io(_))
    }
}
