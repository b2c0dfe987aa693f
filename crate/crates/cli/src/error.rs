use std::path::PathBuf;

use qsd_core::QsdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error(transparent)]
    Core(#[from] QsdError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 1 for invalid input, 2 for numerical failure, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Config { .. } => 1,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                QsdError::IterationLimit { .. }
                | QsdError::ConditioningImpossible { .. }
                | QsdError::Singular(_)
                | QsdError::NoSurvivors { .. }
                | QsdError::NoFit(_)
                | QsdError::RateOverflow { .. } => 2,
                _ => 1,
            },
        }
    }
}

pub(crate) fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
