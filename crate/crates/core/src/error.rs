use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric: |S + S^T|_F = {0:e}")]
    NotSkew(f64),
    #[error("matrix is not a rotation: orthonormality error {0:e}")]
    NotRotation(f64),
    #[error("anchor geometry is degenerate: smallest singular value of C_p is {0:e}")]
    CoplanarAnchors(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("closed-loop matrix is not Hurwitz: max eigenvalue real part {0}")]
    NotHurwitz(f64),
    #[error("attitude is unobservable: smallest eigenvalue of E(M) is {lambda_min:e} at t = {t}")]
    Unobservable { lambda_min: f64, t: f64 },
    #[error("K_v C_p is singular")]
    SingularKvCp,
    #[error("series is not positive: value {value} at t = {t}")]
    NonPositiveSeries { t: f64, value: f64 },
    #[error("not enough samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("divergence detected at t = {t}: {what} reached {value:e}")]
    Divergence { t: f64, what: String, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("plot rendering failed: {0}")]
    Plot(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
