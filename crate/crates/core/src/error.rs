use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("state space of {states} configurations exceeds the enumeration budget of {limit}")]
    Budget { states: f64, limit: u64 },

    #[error("estimator `{estimator}` does not support {distribution} distributions")]
    Unsupported {
        estimator: &'static str,
        distribution: &'static str,
    },

    #[error("non-finite gradient at iteration {iteration} (coordinate {coordinate})")]
    NonFiniteGradient { iteration: usize, coordinate: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, actual })
    }
}
