use thiserror::Error;

/// Errors raised by the tests, the purity protocol and the time-series tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The data carry no information for the requested statistic
    /// (every pair tied, a constant series, a single symbol, ...).
    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Argument outside the domain of a distribution function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series too short: need at least {needed} observations, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Yule-Walker system is numerically singular.
    #[error("near-singular autocorrelation system at order {order} (prediction error ratio {ratio:.3e})")]
    Singular { order: usize, ratio: f64 },

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
