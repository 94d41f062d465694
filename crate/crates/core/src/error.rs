use thiserror::Error;

/// Errors raised by mesh construction, assembly, solves and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("operator invalid: symmetric factorization failed ({0})")]
    Factorization(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
