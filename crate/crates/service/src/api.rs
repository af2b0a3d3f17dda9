//! HTTP routes.

use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use glyphtag_core::{DatasetManifest, GlyphSpec, GLYPH_SET};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::index::FontIndex;
use crate::search::{list_tags, search, SearchError, SearchRequest};

pub struct AppState {
    pub index: FontIndex,
    pub manifest: DatasetManifest,
    pub preview_dir: PathBuf,
    pub preview_size: usize,
}

impl AppState {
    /// Checks the index against the manifest before anything is served.
    pub fn new(index: FontIndex, manifest: DatasetManifest, preview_dir: PathBuf, preview_size: usize) -> Result<Self> {
        index.check_manifest(&manifest)?;
        Ok(AppState {
            index,
            manifest,
            preview_dir,
            preview_size,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>, details: Value) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            details,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<SearchError> for ApiError {
    fn from(e: SearchError) -> Self {
        use SearchError::*;
        match e {
            EmptyQuery => ApiError::new(StatusCode::BAD_REQUEST, "empty_query", "query has no tags", Value::Null),
            UnknownTags(t) => ApiError::new(
                StatusCode::BAD_REQUEST,
                "unknown_tags",
                format!("unknown tags: {}", t.join(", ")),
                json!({ "unknown": t }),
            ),
            BadK(k) => ApiError::new(
                StatusCode::BAD_REQUEST,
                "invalid_k",
                "k must be a positive integer",
                json!({ "k": k }),
            ),
            VariantUnavailable(v) => ApiError::new(
                StatusCode::CONFLICT,
                "variant_unavailable",
                "the index was built without the full model",
                json!({ "variant": v }),
            ),
            Scoring(m) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "scoring_failed", m, Value::Null),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/tags", get(tags))
        .route("/api/search", post(search_route))
        .route("/api/preview/{font_id}/{file}", get(preview))
        .with_state(state)
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "fonts": s.index.header.fonts.len(),
        "tags": s.index.header.tags.len(),
        "model_version": s.index.header.model_version,
        "variants": if s.index.full.is_some() { vec!["basic", "full"] } else { vec!["basic"] },
    }))
}

async fn tags(State(s): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "tags": list_tags(&s.index) }))
}

async fn search_route(
    State(s): State<Arc<AppState>>,
    body: std::result::Result<Json<SearchRequest>, axum::extract::rejection::JsonRejection>,
) -> std::result::Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text(), Value::Null))?;
    Ok(Json(search(&s.index, &req)?).into_response())
}

fn cache_path(dir: &FsPath, size: usize, font_id: &str, c: char) -> PathBuf {
    dir.join(size.to_string()).join(format!("{font_id}_{}.png", c as u32))
}

fn render_preview(s: &AppState, font_id: &str, c: char) -> std::result::Result<Vec<u8>, ApiError> {
    let path = cache_path(&s.preview_dir, s.preview_size, font_id, c);
    if let Ok(bytes) = std::fs::read(&path) {
        return Ok(bytes);
    }
    let internal = |e: String| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "preview_failed", e, Value::Null);
    let bytes = s
        .manifest
        .render_glyph(&GlyphSpec::new(font_id, c), s.preview_size)
        .and_then(|img| img.to_png())
        .map_err(|e| internal(e.to_string()))?;
    // Write through a unique temp file so concurrent requests never observe
    // a partial PNG.
    if let Some(parent) = path.parent() {
        if std::fs::create_dir_all(parent).is_ok() {
            let tmp = parent.join(format!(
                ".{}.{:?}.tmp",
                path.file_name().and_then(|n| n.to_str()).unwrap_or("preview"),
                std::thread::current().id()
            ));
            if std::fs::write(&tmp, &bytes).is_ok() && std::fs::rename(&tmp, &path).is_err() {
                let _ = std::fs::remove_file(&tmp);
            }
        }
    }
    Ok(bytes)
}

async fn preview(
    State(s): State<Arc<AppState>>,
    Path((font_id, file)): Path<(String, String)>,
) -> std::result::Result<Response, ApiError> {
    let mut chars = file.strip_suffix(".png").unwrap_or("").chars();
    let c = match (chars.next(), chars.next()) {
        (Some(c), None) if GLYPH_SET.contains(&c) => c,
        _ => {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_glyph",
                "preview path must be /api/preview/{font_id}/{letter}.png with a letter a-z or A-Z",
                json!({ "file": file }),
            ))
        }
    };
    if s.index.basic.position(&font_id).is_none() {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_font",
            format!("no font `{font_id}`"),
            json!({ "font_id": font_id }),
        ));
    }
    let state = s.clone();
    let bytes = tokio::task::spawn_blocking(move || render_preview(&state, &font_id, c))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "preview_failed", e.to_string(), Value::Null))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

/// Serves until the process is stopped.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await
}
