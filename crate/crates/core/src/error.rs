//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix/vector shapes.
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// Input data violates a documented invariant (bad response values,
    /// rank-deficient restriction, malformed config, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A biasing parameter is outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    /// A fitted probability collapsed onto 0 or 1, so the IRLS weight is
    /// numerically zero and the working response is undefined.
    #[error("degenerate weight at row {row}: fitted probability {pi:e} is within the floor of 0/1")]
    DegenerateWeight { row: usize, pi: f64 },

    /// The likelihood has no finite maximizer (all-0/all-1 response, or the
    /// iteration diverged towards a separating hyperplane).
    #[error("complete separation: {0}")]
    Separation(String),

    /// A matrix that must be symmetric positive definite failed to factor.
    #[error("singular or indefinite matrix: {0}")]
    Singular(String),

    /// An operation that requires a converged fit received one that is not.
    #[error("fit did not converge; {0}")]
    NotConverged(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code used by the CLI error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidInput(_) => "invalid-input",
            Error::ParamDomain(_) => "parameter-domain",
            Error::DegenerateWeight { .. } => "degenerate-weight",
            Error::Separation(_) => "complete-separation",
            Error::Singular(_) => "singular-matrix",
            Error::NotConverged(_) => "not-converged",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }

    /// True for failures of the numerics (as opposed to bad inputs); the CLI
    /// maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateWeight { .. }
                | Error::Separation(_)
                | Error::Singular(_)
                | Error::NotConverged(_)
        )
    }
}
