use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] glyphtag_core::Error),
    #[error(transparent)]
    Model(#[from] glyphtag_model::ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("index: {0}")]
    Index(String),
    #[error("index version {found} is not supported (expected {expected})")]
    IndexVersion { expected: u32, found: u32 },
    #[error("index was built for vocabulary {index}, manifest has {manifest}")]
    VocabularyMismatch { index: String, manifest: String },
}

pub type Result<T> = std::result::Result<T, ServiceError>;

pub(crate) fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io {
        path: path.to_path_buf(),
        source,
    }
}
