use thiserror::Error;

/// Which covariance block failed to factor during a single pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Covariance of the conditioning set alone.
    Conditioning,
    /// Covariance of the conditioning set plus the response being predicted.
    Joint,
}

impl std::fmt::Display for BlockKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockKind::Conditioning => f.write_str("conditioning block"),
            BlockKind::Joint => f.write_str("joint block"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    #[error("{kind} at ordered position {index} is not positive definite")]
    NotPositiveDefinite { index: usize, kind: BlockKind },

    #[error("design matrix is rank deficient: X'S^-1 X could not be factored")]
    RankDeficientDesign,

    #[error("basis construction failed: {0}")]
    Basis(String),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
