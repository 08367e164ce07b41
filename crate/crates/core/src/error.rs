use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("matrix is singular (zero pivot at step {step})")]
    SingularMatrix { step: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("index ({row}, {col}) out of bounds for {nrows}x{ncols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
