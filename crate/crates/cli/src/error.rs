use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

/// Everything that ends a run with exit status 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] lyapkit_core::Error),
}
