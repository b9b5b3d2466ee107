use thiserror::Error;

/// Errors produced anywhere in the training stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument had the wrong shape or held a non-finite value.
    #[error("rejected input: {0}")]
    InvalidInput(String),

    /// An operation was called while its receiver was in the wrong state.
    #[error("rejected state: {0}")]
    InvalidState(String),

    /// A configuration value is out of range.
    #[error("rejected config: {0}")]
    InvalidConfig(String),

    /// A loss, gradient or operator product came out NaN or infinite.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what}: expected length {want}, got {got}"
        )))
    }
}

pub(crate) fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what}: non-finite value")))
    }
}
