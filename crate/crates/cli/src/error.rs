use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(#[from] alegeo_core::error::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 0 ok, 1 config or IO, 2 solver failure, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        use alegeo_core::error::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Solver(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidArgument(_)
                | E::GridTooSmall(_)
                | E::GridMismatch(_)
                | E::UnknownStrategy { .. }
                | E::Parse(_)
                | E::Io(_) => 1,
                // inadmissible endpoint data is a config problem
                E::PositivityViolation { .. } => 1,
                _ => 2,
            },
        }
    }
}
