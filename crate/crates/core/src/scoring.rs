//! Precomputed per-glyph tag probabilities and the query scoring rules
//! built on them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::affinity::{AffinityHead, QueryVector};
use crate::error::{Error, Result};
use crate::metrics::{product_baseline_scorer, FontScorer};

/// Per-glyph probabilities for a set of fonts, with an optional trained
/// affinity head for multi-tag queries.
///
/// Single-tag queries score by the font-level mean probability. Multi-tag
/// queries use the head averaged over glyphs when present, otherwise the
/// product of font-level probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub fonts: Vec<String>,
    /// `glyph_probs[font][glyph][tag]`.
    pub glyph_probs: Vec<Vec<Vec<f64>>>,
    pub mean_probs: Vec<Vec<f64>>,
    pub head: Option<AffinityHead>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

fn malformed(message: String) -> Error {
    Error::Malformed {
        what: "score table",
        message,
    }
}

/// Arithmetic mean of equal-length vectors, summed in order.
pub fn mean_vector(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or_else(|| malformed("no glyph probabilities".into()))?;
    let mut acc = vec![0.0; first.len()];
    for r in rows {
        if r.len() != acc.len() {
            return Err(malformed("glyph probability vectors differ in length".into()));
        }
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

impl ScoreTable {
    pub fn new(fonts: Vec<String>, glyph_probs: Vec<Vec<Vec<f64>>>, head: Option<AffinityHead>) -> Result<Self> {
        if fonts.len() != glyph_probs.len() {
            return Err(malformed(format!(
                "{} fonts but {} probability blocks",
                fonts.len(),
                glyph_probs.len()
            )));
        }
        let mean_probs = glyph_probs.iter().map(|g| mean_vector(g)).collect::<Result<Vec<_>>>()?;
        let n = mean_probs.first().map(Vec::len).unwrap_or(0);
        if mean_probs.iter().any(|m| m.len() != n) {
            return Err(malformed("fonts disagree on the number of tags".into()));
        }
        if let Some(h) = &head {
            if h.n != n {
                return Err(malformed(format!("head expects {} tags, table has {n}", h.n)));
            }
        }
        let mut table = ScoreTable {
            fonts,
            glyph_probs,
            mean_probs,
            head,
            index: HashMap::new(),
        };
        table.reindex()?;
        Ok(table)
    }

    /// Rebuilds the font lookup after deserialization.
    pub fn reindex(&mut self) -> Result<()> {
        self.index.clear();
        for (i, f) in self.fonts.iter().enumerate() {
            if self.index.insert(f.clone(), i).is_some() {
                return Err(malformed(format!("duplicate font `{f}`")));
            }
        }
        Ok(())
    }

    pub fn n_tags(&self) -> usize {
        self.mean_probs.first().map(Vec::len).unwrap_or(0)
    }

    pub fn position(&self, font_id: &str) -> Option<usize> {
        self.index.get(font_id).copied()
    }

    /// Same probabilities without the head: multi-tag queries fall back to
    /// the product rule.
    pub fn without_head(&self) -> ScoreTable {
        ScoreTable {
            head: None,
            ..self.clone()
        }
    }

    pub fn score_at(&self, font: usize, query: &[usize]) -> Result<f64> {
        let n = self.n_tags();
        if query.is_empty() {
            return Err(malformed("empty query".into()));
        }
        if let Some(&t) = query.iter().find(|&&t| t >= n) {
            return Err(malformed(format!("tag index {t} outside {n} tags")));
        }
        let mean = self
            .mean_probs
            .get(font)
            .ok_or_else(|| malformed(format!("font position {font} out of range")))?;
        if query.len() == 1 {
            return Ok(mean[query[0]]);
        }
        match &self.head {
            Some(h) => {
                let mut bits = vec![0u8; n];
                for &t in query {
                    bits[t] = 1;
                }
                let q = QueryVector { bits, tags: Vec::new() };
                h.score_glyphs(&self.glyph_probs[font], &q)
            }
            None => Ok(product_baseline_scorer(mean, query)),
        }
    }
}

impl FontScorer for ScoreTable {
    fn score(&self, query: &[usize], font_id: &str) -> std::result::Result<f64, String> {
        let f = self
            .position(font_id)
            .ok_or_else(|| format!("no probabilities for font `{font_id}`"))?;
        self.score_at(f, query).map_err(|e| e.to_string())
    }
}
