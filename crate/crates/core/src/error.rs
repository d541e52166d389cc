use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an invalid argument or configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric positive definite (after {attempts} jittered attempts)")]
    NotPositiveDefinite { attempts: usize },

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("non-finite gradient {value} at SGD iteration {iteration}")]
    NonFiniteGradient { iteration: usize, value: f64 },

    #[error("non-finite parameter at iteration {iteration}")]
    Diverged { iteration: usize },

    /// The Normal-Inverse-Gamma scale collapsed to a non-positive value.
    #[error("ill-posed configuration: b_P = {0} is not positive")]
    IllPosed(f64),

    #[error("gamma-ratio expectations undefined (a_P + (d-3)/2 = {0} <= 0); use the Monte-Carlo mode")]
    GammaRatioUndefined(f64),

    #[error("{0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::Unsupported(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
