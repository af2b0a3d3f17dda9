//! Score tables from trained models: per-glyph probabilities for every font
//! plus the retrieval head when the checkpoint has one.

use candle_core::DType;
use glyphtag_core::scoring::ScoreTable;
use glyphtag_core::DatasetManifest;

use crate::attention::AttendedRecognizer;
use crate::checkpoint::Models;
use crate::data::GlyphBank;
use crate::error::Result;
use crate::recognizer::{glyph_probabilities, TagPredictor};

/// `[font][glyph][tag]` probabilities for every font of `bank`.
pub fn glyph_prob_table(model: &impl TagPredictor, bank: &GlyphBank, dtype: DType) -> Result<Vec<Vec<Vec<f64>>>> {
    (0..bank.len()).map(|f| glyph_probabilities(model, bank, f, dtype)).collect()
}

/// Which parts of a checkpoint score queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Recognizer alone; multi-tag queries use the product rule.
    Basic,
    /// Attention when trained, and the retrieval head when trained.
    Full,
}

/// Score table over `fonts` (sorted ascending in the result).
pub fn score_table(
    models: &Models,
    manifest: &DatasetManifest,
    fonts: &[String],
    dtype: DType,
    variant: Variant,
) -> Result<ScoreTable> {
    let mut fonts = fonts.to_vec();
    fonts.sort();
    let bank = GlyphBank::new(manifest, &fonts, models.meta.backbone.image_size)?;
    let (probs, head) = match (variant, &models.classifier, &models.attention) {
        (Variant::Full, Some(cls), Some(att)) => {
            let attended = AttendedRecognizer::new(&models.recognizer, cls, att);
            let head = models.retrieval.as_ref().map(|h| h.to_core()).transpose()?;
            (glyph_prob_table(&attended, &bank, dtype)?, head)
        }
        (Variant::Full, _, _) => {
            let head = models.retrieval.as_ref().map(|h| h.to_core()).transpose()?;
            (glyph_prob_table(&models.recognizer, &bank, dtype)?, head)
        }
        (Variant::Basic, _, _) => (glyph_prob_table(&models.recognizer, &bank, dtype)?, None),
    };
    Ok(ScoreTable::new(fonts, probs, head)?)
}
