use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix is not symmetric at ({i},{j}): {a} vs {b}")]
    NonSymmetric { i: usize, j: usize, a: i64, b: i64 },

    #[error("weight matrix has nonzero diagonal at node {i}")]
    NonZeroDiagonal { i: usize },

    #[error("thresholds must be strictly increasing and positive (index {index})")]
    BadThresholds { index: usize },

    #[error("layer stack violates nesting at layer {k}, dyad ({i},{j})")]
    NestingViolation { k: usize, i: usize, j: usize },

    #[error("dyad ({i},{j}) lies outside the support layer")]
    SupportViolation { i: usize, j: usize },

    #[error("unknown node attribute `{0}`")]
    UnknownAttribute(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("enumeration support too large: {m} dyads (max {max})")]
    SupportTooLarge { m: usize, max: usize },

    #[error("chain contains no stored draws")]
    EmptyChain,

    #[error("predictive ensemble is empty")]
    EmptyEnsemble,

    #[error("series too short for diagnostics: length {0}")]
    SeriesTooShort(usize),

    #[error("fingerprint mismatch: chain was fitted to different data or model")]
    FingerprintMismatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
