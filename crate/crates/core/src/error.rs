use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Covariance matrix was not positive definite even after jitter escalation.
    #[error("covariance matrix is not positive definite (last jitter {jitter:e})")]
    FactorizationFailure { jitter: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("masks of the two models differ")]
    MaskMismatch,

    #[error("reports do not cover the same subjects")]
    SubjectMismatch,

    #[error("score {0} is not covered by any binning segment")]
    UncoveredScore(f64),

    #[error("series has zero variance")]
    ZeroVariance,

    /// Malformed binary or text file; `offset` names the first offending byte.
    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }
}
