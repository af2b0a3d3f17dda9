//! Query handling over a loaded index.

use glyphtag_core::metrics::rank_order;
use glyphtag_core::tags::normalize_tag;
use serde::{Deserialize, Serialize};

use crate::index::FontIndex;

pub const DEFAULT_K: i64 = 20;
/// Specimen word whose glyph previews represent a font in results.
pub const PREVIEW_TEXT: &str = "Handgloves";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Basic,
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRequest {
    pub tags: Vec<String>,
    #[serde(default = "default_k")]
    pub k: i64,
    #[serde(default)]
    pub variant: ModelVariant,
}

fn default_k() -> i64 {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub rank: usize,
    pub font_id: String,
    pub score: f64,
    pub previews: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    /// Normalized query tags in vocabulary order.
    pub query: Vec<String>,
    pub variant: ModelVariant,
    pub k: usize,
    pub results: Vec<SearchHit>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchError {
    EmptyQuery,
    UnknownTags(Vec<String>),
    BadK(i64),
    VariantUnavailable(ModelVariant),
    Scoring(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagEntry {
    pub tag: String,
    pub frequency: usize,
}

/// Vocabulary by descending frequency, ties lexicographic.
pub fn list_tags(index: &FontIndex) -> Vec<TagEntry> {
    let mut v: Vec<TagEntry> = index
        .header
        .tags
        .iter()
        .zip(&index.header.frequencies)
        .map(|(t, &f)| TagEntry {
            tag: t.clone(),
            frequency: f,
        })
        .collect();
    v.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.tag.cmp(&b.tag)));
    v
}

pub fn preview_urls(font_id: &str) -> Vec<String> {
    PREVIEW_TEXT
        .chars()
        .map(|c| format!("/api/preview/{font_id}/{c}.png"))
        .collect()
}

/// Normalizes and resolves query tags to sorted, de-duplicated indices.
pub fn resolve_tags(index: &FontIndex, raw: &[String]) -> Result<Vec<usize>, SearchError> {
    if raw.is_empty() {
        return Err(SearchError::EmptyQuery);
    }
    let mut idx = Vec::new();
    let mut unknown = Vec::new();
    for r in raw {
        let found = normalize_tag(r).and_then(|t| index.header.tags.binary_search(&t).ok());
        match found {
            Some(i) => idx.push(i),
            None => unknown.push(r.clone()),
        }
    }
    if !unknown.is_empty() {
        return Err(SearchError::UnknownTags(unknown));
    }
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

pub fn search(index: &FontIndex, req: &SearchRequest) -> Result<SearchResponse, SearchError> {
    let query = resolve_tags(index, &req.tags)?;
    if req.k <= 0 {
        return Err(SearchError::BadK(req.k));
    }
    let table = index
        .table(req.variant == ModelVariant::Full)
        .ok_or(SearchError::VariantUnavailable(req.variant))?;
    let mut scored = Vec::with_capacity(table.fonts.len());
    for (i, f) in table.fonts.iter().enumerate() {
        let s = table.score_at(i, &query).map_err(|e| SearchError::Scoring(e.to_string()))?;
        if !s.is_finite() {
            return Err(SearchError::Scoring(format!("non-finite score for `{f}`")));
        }
        scored.push((f.clone(), s));
    }
    scored.sort_by(rank_order);
    let k = (req.k as usize).min(scored.len());
    Ok(SearchResponse {
        query: query.iter().map(|&i| index.header.tags[i].clone()).collect(),
        variant: req.variant,
        k,
        results: scored
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(r, (font_id, score))| SearchHit {
                rank: r + 1,
                previews: preview_urls(&font_id),
                font_id,
                score,
            })
            .collect(),
    })
}
