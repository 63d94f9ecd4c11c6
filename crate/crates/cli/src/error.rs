use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot write CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] vagt_core::Error),
}

impl CliError {
    /// 2 for a numerical breakdown of the flow, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(vagt_core::Error::NumericalBreakdown { .. }) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
