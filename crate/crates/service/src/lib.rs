//! Font index construction and the HTTP retrieval API.

pub mod api;
pub mod error;
pub mod index;
pub mod search;

pub use api::{router, serve, AppState};
pub use error::{Result, ServiceError};
pub use index::{build_index, FontIndex};
pub use search::{search, list_tags, ModelVariant, SearchRequest, SearchResponse};
