use thiserror::Error;

/// Errors produced by the modelling, synthesis and fitting routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("index {index} out of range for {what} of size {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate point configuration: {0}")]
    Degenerate(&'static str),

    #[error("query point lies outside the field domain")]
    OutOfDomain,

    #[error("singular linear system: {0}")]
    Singular(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation undefined: zero variance")]
    ZeroVariance,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that stem from numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::Singular(_) | Error::NonFinite(_) | Error::ZeroVariance
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
