use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("check {check}: {source}")]
    Check {
        check: &'static str,
        #[source]
        source: semiflow_core::Error,
    },
    #[error(transparent)]
    Core(#[from] semiflow_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
