use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QaeError {
    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode pair ({lo}, {hi}) invalid for dimension {dim}")]
    ModeOutOfRange { lo: usize, hi: usize, dim: usize },

    #[error("invalid dimensions d={d}, n={n}: need 1 <= n < d")]
    InvalidDimensions { d: usize, n: usize },

    #[error("parameter vector has {found} angles, layout expects {expected}")]
    ParameterCount { expected: usize, found: usize },

    #[error("compression impossible for this state (junk probability {p_junk})")]
    CompressionImpossible { p_junk: f64 },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, QaeError>;
