use thiserror::Error;

/// Failure of a CLI run, carrying the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] jostlab::Error),

    #[error("I/O error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(jostlab::Error::Quadrature(_)) => 4,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 5,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
