use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwrcError {
    #[error("matrix is rank deficient (smallest/largest singular value {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("eigenvalue classification ambiguous: {0}")]
    ClassificationAmbiguous(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("matrix is singular (condition number {cond:e})")]
    Singular { cond: f64 },
    #[error("covariance is not positive semidefinite (eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("power constraint violated: used {used}, budget {budget}")]
    PowerViolation { used: f64, budget: f64 },
    #[error("projection vector is not unit norm (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    QuadratureFailure { tol: f64, estimate: f64 },
    #[error("parse error in `{field}`: {msg}")]
    Parse { field: String, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("too many degenerate draws: {failed} of {attempted}")]
    ResampleLimit { failed: usize, attempted: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl TwrcError {
    /// True for input/configuration problems, false for numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            TwrcError::Parse { .. }
                | TwrcError::Io(_)
                | TwrcError::InvalidConfig(_)
                | TwrcError::DomainError(_)
                | TwrcError::DimensionMismatch(_)
        )
    }
}

impl From<std::io::Error> for TwrcError {
    fn from(e: std::io::Error) -> Self {
        TwrcError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TwrcError>;
