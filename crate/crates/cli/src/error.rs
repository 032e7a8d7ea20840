use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    /// A core routine rejected its input or failed numerically.
    #[error("{stage}: {source}")]
    Model {
        stage: &'static str,
        #[source]
        source: latticetomo::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed output file: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl RunError {
    pub fn model(stage: &'static str) -> impl FnOnce(latticetomo::Error) -> RunError {
        move |source| RunError::Model { stage, source }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> RunError {
        let path = path.into();
        move |source| RunError::Io { path, source }
    }

    /// 1 config error, 2 numerical failure, 3 I/O error.
    pub fn exit_code(&self) -> u8 {
        use latticetomo::Error as E;
        match self {
            RunError::Config(_) => 1,
            RunError::Model { source, .. } => match source {
                E::InvalidDimension(_) | E::InvalidParameter { .. } | E::InvalidConfiguration(_) => 1,
                E::InvalidState(_) | E::NumericalFailure(_) | E::FitFailure { .. } => 2,
            },
            RunError::Io { .. } | RunError::Format { .. } => 3,
        }
    }
}
