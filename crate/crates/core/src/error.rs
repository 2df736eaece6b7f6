use thiserror::Error;

/// Errors surfaced by the library.
///
/// The CLI maps these onto distinct exit codes, so keep the categories
/// coarse: parse (bad file syntax), validation (inconsistent data),
/// numerical (degenerate estimation), unsupported (documented limits).
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
