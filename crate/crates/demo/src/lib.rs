//! WebAssembly bindings for the static page in `www/`.

use std::collections::BTreeSet;

use glyphtag_core::metrics::{average_precision, ndcg, RankingResult};
use glyphtag_core::render::rasterize;
use glyphtag_core::style::derive_tags;
use glyphtag_core::FontParams;
use wasm_bindgen::prelude::*;

#[allow(clippy::too_many_arguments)]
fn params(stroke: f64, slant: f64, width: f64, serif: bool, rounded: bool, outline: bool, shadow: bool) -> FontParams {
    FontParams {
        stroke_width: stroke,
        slant_degrees: slant,
        width_ratio: width,
        serif,
        rounded,
        outline,
        shadow,
    }
}

/// Grayscale pixels, row-major, 255 = white background.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn render_glyph(
    letter: char,
    size: usize,
    stroke: f64,
    slant: f64,
    width: f64,
    serif: bool,
    rounded: bool,
    outline: bool,
    shadow: bool,
) -> Result<Vec<u8>, JsError> {
    let p = params(stroke, slant, width, serif, rounded, outline, shadow);
    let px = rasterize(&p, letter, size).map_err(|e| JsError::new(&e.to_string()))?;
    Ok(px.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect())
}

/// Ground-truth tags the style implies, comma separated.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn style_tags(
    stroke: f64,
    slant: f64,
    width: f64,
    serif: bool,
    rounded: bool,
    outline: bool,
    shadow: bool,
) -> String {
    derive_tags(&params(stroke, slant, width, serif, rounded, outline, shadow)).join(", ")
}

/// `[AP, nDCG]` for a ranked relevance list such as `"1 0 1 0"`.
#[wasm_bindgen]
pub fn ranking_metrics(relevance: &str) -> Result<Vec<f64>, JsError> {
    let rel: Vec<bool> = relevance
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(JsError::new(&format!("expected 0 or 1, got `{other}`"))),
        })
        .collect::<Result<_, _>>()?;
    let scores = (0..rel.len()).map(|i| (format!("{i:04}"), -(i as f64))).collect();
    let positives: BTreeSet<String> = (0..rel.len()).filter(|&i| rel[i]).map(|i| format!("{i:04}")).collect();
    let r = RankingResult::new(vec![], scores, positives).map_err(|e| JsError::new(&e.to_string()))?;
    match (average_precision(&r), ndcg(&r)) {
        (Some(ap), Some(n)) => Ok(vec![ap, n]),
        _ => Err(JsError::new("the list needs at least one relevant item")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyph_has_ink_and_tags_follow_style() {
        let px = glyphtag_core::render::rasterize(&params(0.12, 12.0, 1.0, true, false, false, false), 'a', 32).unwrap();
        assert_eq!(px.len(), 32 * 32);
        assert!(px.iter().any(|&v| v < 0.5));
        let tags = style_tags(0.12, 12.0, 1.0, true, false, false, false);
        assert!(tags.contains("bold") && tags.contains("italic") && tags.contains("serif"));
    }
}
