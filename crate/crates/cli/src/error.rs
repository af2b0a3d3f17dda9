use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("missing {artifact}: run `glyphtag {stage}` first")]
    MissingPrerequisite { artifact: PathBuf, stage: &'static str },

    #[error("output directory {0} is locked by another run (remove .lock if stale)")]
    Locked(PathBuf),

    #[error(transparent)]
    Core(#[from] glyphtag_core::Error),

    #[error(transparent)]
    Model(#[from] glyphtag_model::ModelError),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Service(#[from] glyphtag_service::ServiceError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),
}

pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use glyphtag_model::ModelError;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Model(ModelError::Config(_)) => 2,
            CliError::MissingPrerequisite { .. } => 3,
            CliError::Model(ModelError::Divergence { .. }) => 4,
            _ => 1,
        }
    }
}
