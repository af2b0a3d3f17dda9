//! Pre-rendered glyph rasters and batch sampling.

use std::collections::HashMap;

use candle_core::{DType, Tensor};
use glyphtag_core::render::rasterize;
use glyphtag_core::{DatasetManifest, Split, GLYPH_COUNT, GLYPH_SET, STANDARD_FONT_ID};
use rand::Rng;

use crate::error::{ModelError, Result};
use crate::layers::image_batch;
use crate::train::label_matrix;

/// All 52 glyphs of a set of fonts at one size, plus the standard font.
pub struct GlyphBank {
    pub size: usize,
    pub fonts: Vec<String>,
    index: HashMap<String, usize>,
    /// `images[font][glyph]`, row-major pixels.
    images: Vec<Vec<Vec<f32>>>,
    standard: Vec<Vec<f32>>,
}

fn render_font(manifest: &DatasetManifest, font_id: &str, size: usize) -> Result<Vec<Vec<f32>>> {
    let params = manifest.params(font_id)?;
    GLYPH_SET
        .iter()
        .map(|&c| Ok(rasterize(&params, c, size)?))
        .collect()
}

impl GlyphBank {
    pub fn new(manifest: &DatasetManifest, fonts: &[String], size: usize) -> Result<Self> {
        let images = fonts
            .iter()
            .map(|id| render_font(manifest, id, size))
            .collect::<Result<Vec<_>>>()?;
        Ok(GlyphBank {
            size,
            index: fonts.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect(),
            fonts: fonts.to_vec(),
            images,
            standard: render_font(manifest, STANDARD_FONT_ID, size)?,
        })
    }

    pub fn len(&self) -> usize {
        self.fonts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fonts.is_empty()
    }

    pub fn font_index(&self, font_id: &str) -> Option<usize> {
        self.index.get(font_id).copied()
    }

    pub fn image(&self, font: usize, glyph: usize) -> &[f32] {
        &self.images[font][glyph]
    }

    pub fn standard(&self, glyph: usize) -> &[f32] {
        &self.standard[glyph]
    }

    /// `(n, 1, size, size)` tensor of the given `(font, glyph)` pairs.
    pub fn batch(&self, pairs: &[(usize, usize)], dtype: DType) -> Result<Tensor> {
        let imgs: Vec<&[f32]> = pairs.iter().map(|&(f, g)| self.image(f, g)).collect();
        image_batch(&imgs, self.size, dtype)
    }

    pub fn standard_batch(&self, glyphs: &[usize], dtype: DType) -> Result<Tensor> {
        let imgs: Vec<&[f32]> = glyphs.iter().map(|&g| self.standard(g)).collect();
        image_batch(&imgs, self.size, dtype)
    }

    /// All glyphs of one font as a `(52, 1, size, size)` tensor.
    pub fn font_batch(&self, font: usize, dtype: DType) -> Result<Tensor> {
        let pairs: Vec<(usize, usize)> = (0..GLYPH_COUNT).map(|g| (font, g)).collect();
        self.batch(&pairs, dtype)
    }
}

/// One epoch of `(font, glyph)` samples: every font `per_font` times with
/// uniformly drawn glyphs, shuffled, cut into batches.
pub fn epoch_batches(
    n_fonts: usize,
    per_font: usize,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<(usize, usize)>>> {
    if n_fonts == 0 {
        return Err(ModelError::EmptyDataset("no training fonts".into()));
    }
    let mut samples: Vec<(usize, usize)> = (0..n_fonts)
        .flat_map(|f| std::iter::repeat_n(f, per_font))
        .map(|f| (f, 0))
        .collect();
    for s in samples.iter_mut() {
        s.1 = rng.random_range(0..GLYPH_COUNT);
    }
    for i in (1..samples.len()).rev() {
        let j = rng.random_range(0..=i);
        samples.swap(i, j);
    }
    Ok(samples.chunks(batch_size).map(|c| c.to_vec()).collect())
}

/// Rendered train and validation fonts with their label matrices.
pub struct TrainingData<'a> {
    pub manifest: &'a DatasetManifest,
    pub train: GlyphBank,
    pub val: GlyphBank,
    pub train_labels: Tensor,
    pub val_labels: Tensor,
    pub dtype: DType,
}

impl<'a> TrainingData<'a> {
    pub fn new(manifest: &'a DatasetManifest, size: usize, dtype: DType) -> Result<Self> {
        let train_ids = manifest.split(Split::Train).to_vec();
        if train_ids.is_empty() {
            return Err(ModelError::EmptyDataset("train split is empty".into()));
        }
        let val_ids = manifest.split(Split::Val).to_vec();
        Ok(TrainingData {
            manifest,
            train_labels: label_matrix(manifest, &train_ids, dtype)?,
            val_labels: label_matrix(manifest, &val_ids, dtype)?,
            train: GlyphBank::new(manifest, &train_ids, size)?,
            val: GlyphBank::new(manifest, &val_ids, size)?,
            dtype,
        })
    }

    pub fn n_tags(&self) -> usize {
        self.manifest.vocabulary.len()
    }
}
