use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vocabulary: every tag was filtered out (min_count = {min_count})")]
    EmptyVocabulary { min_count: usize },

    #[error("no raw tag lists given")]
    NoTagLists,

    #[error("unknown font id `{0}`")]
    UnknownFont(String),

    #[error("unsupported character {0:?}: only a-z and A-Z are in the glyph set")]
    UnsupportedCharacter(char),

    #[error("image size {0} is out of range")]
    BadImageSize(usize),

    #[error("corpus of {n_fonts} fonts cannot populate train/val/test splits (need at least 10)")]
    CorpusTooSmall { n_fonts: usize },

    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),

    #[error("unknown tags: {}", .0.join(", "))]
    UnknownTags(Vec<String>),

    #[error("invalid evaluation group for tag `{tag}`: {reason}")]
    InvalidGroup { tag: String, reason: String },

    #[error("scorer failed on query [{query}] / font `{font_id}`: {message}")]
    Scorer {
        query: String,
        font_id: String,
        message: String,
    },

    #[error("non-finite score for font `{0}`")]
    NonFiniteScore(String),

    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("png encoding failed: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("png decoding failed: {0}")]
    PngDecode(#[from] png::DecodingError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
