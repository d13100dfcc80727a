use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Rejected configuration, anchored to a line of the config file.
    #[error("{path}:{line}: {message}")]
    ConfigInvalid { path: String, line: usize, message: String },
    #[error(transparent)]
    Core {
        #[from]
        source: adaptint_core::Error,
    },
    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {kind} file {}: {message}", path.display())]
    Format { kind: &'static str, path: PathBuf, message: String },
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid { .. } => "ConfigInvalid",
            CliError::Core { source } => source.name(),
            CliError::Io { .. } => "Io",
            CliError::Format { .. } => "Format",
        }
    }

    /// 2 for configuration errors, 3 for everything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid { .. } => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub(crate) fn format(kind: &'static str, path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format { kind, path: path.into(), message: message.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
