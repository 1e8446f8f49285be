use std::path::PathBuf;

/// Errors surfaced by the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Domain(#[from] wishart_minors_core::Error),
}

impl CliError {
    /// Process exit code: 1 for I/O and parse problems, 2 for domain errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Output(_) | CliError::Parse(_) | CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}
