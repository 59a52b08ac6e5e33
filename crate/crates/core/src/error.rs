use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("patterns are defined on different angle grids")]
    GridMismatch,

    #[error("invalid target spec: {0}")]
    InvalidSpec(String),

    #[error("phase undefined at element {0} (zero magnitude)")]
    UndefinedPhase(usize),

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Gram matrix is singular beyond ridge repair")]
    SingularGram,

    #[error("no linearly independent atom left to select")]
    RankDeficient,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("resource exhausted: {0}")]
    Resource(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::Degenerate(_) => "degenerate_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::GridMismatch => "grid_mismatch",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::UndefinedPhase(_) => "undefined_phase",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Unsupported(_) => "unsupported",
            Error::SingularGram => "singular_gram",
            Error::RankDeficient => "rank_deficient",
            Error::Precondition(_) => "precondition",
            Error::Parse { .. } => "parse",
            Error::Resource(_) => "resource",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
