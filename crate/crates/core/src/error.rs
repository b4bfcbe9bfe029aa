use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A per-interval regression had a rank-deficient predictor matrix.
    #[error("rank-deficient design at interval t={t}: {reason}")]
    RankDeficient { t: usize, reason: String },

    /// A moment matrix was singular (or its condition number exceeded the cutoff).
    #[error("singular moment matrix at t={t}, a={action}")]
    SingularMoment { t: usize, action: u8 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
