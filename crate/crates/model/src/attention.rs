//! Attentive feature selection. A font-class distribution is mapped to a
//! node-level attention map in (0, 1) that re-weights the hidden feature
//! before the tag layer.

use std::sync::atomic::{AtomicUsize, Ordering};

use candle_core::{DType, Tensor};
use glyphtag_core::GLYPH_COUNT;
use rand::Rng;

use crate::config::{AttentionConfig, TrainConfig};
use crate::data::{epoch_batches, GlyphBank, TrainingData};
use crate::error::{ModelError, Result};
use crate::layers::{sigmoid, Dense};
use crate::params::ParamStore;
use crate::recognizer::{probe_glyphs, stage_rng, tag_loss, FontClassifier, Recognizer, TagPredictor, TAG_HEAD};
use crate::train::{checked, gather_rows, scalar, Adam, TrainLog};

pub const ATTENTION: &str = "attention";

/// Fully-connected layer from M font classes to D feature nodes, then sigmoid.
pub struct AttentionModule {
    pub fc: Dense,
}

impl AttentionModule {
    pub fn new(store: &mut ParamStore, n_classes: usize, feature_dim: usize, cfg: &AttentionConfig) -> Result<Self> {
        cfg.validate()?;
        let w = store.normal(&format!("{ATTENTION}.weight"), &[feature_dim, n_classes], cfg.init_mu, cfg.init_sigma)?;
        let b = store.constant(&format!("{ATTENTION}.bias"), &[feature_dim], 0.0)?;
        Ok(AttentionModule { fc: Dense { w, b } })
    }

    /// `(B, M)` distributions to `(B, D)` maps.
    pub fn map(&self, dist: &Tensor) -> Result<Tensor> {
        let m = dist.dims().last().copied().unwrap_or(0);
        if m != self.fc.in_dim() {
            return Err(ModelError::Shape(format!(
                "class distribution of length {m}, attention expects {}",
                self.fc.in_dim()
            )));
        }
        sigmoid(&self.fc.forward(dist)?)
    }
}

/// Element-wise product of attention maps.
pub fn aggregate_attention(maps: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = maps
        .first()
        .ok_or_else(|| ModelError::EmptyDataset("no attention maps to aggregate".into()))?;
    let mut out = first.clone();
    for m in &maps[1..] {
        if m.len() != out.len() {
            return Err(ModelError::Shape(format!("attention maps of length {} and {}", out.len(), m.len())));
        }
        for (o, v) in out.iter_mut().zip(m) {
            *o *= v;
        }
    }
    Ok(out)
}

/// Tensor form of [`aggregate_attention`] over a list of `(B, D)` maps.
pub fn aggregate_maps(maps: &[Tensor]) -> Result<Tensor> {
    let first = maps
        .first()
        .ok_or_else(|| ModelError::EmptyDataset("no attention maps to aggregate".into()))?;
    let mut out = first.clone();
    for m in &maps[1..] {
        out = (out * m)?;
    }
    Ok(out)
}

/// Recognizer whose hidden feature is re-weighted by a single-image
/// attention map (inference path).
pub struct AttendedRecognizer<'a> {
    pub recognizer: &'a Recognizer,
    pub classifier: &'a FontClassifier,
    pub attention: &'a AttentionModule,
    font_model_images: AtomicUsize,
}

impl<'a> AttendedRecognizer<'a> {
    pub fn new(recognizer: &'a Recognizer, classifier: &'a FontClassifier, attention: &'a AttentionModule) -> Self {
        AttendedRecognizer {
            recognizer,
            classifier,
            attention,
            font_model_images: AtomicUsize::new(0),
        }
    }

    /// Images passed through the font classifier so far.
    pub fn font_model_images(&self) -> usize {
        self.font_model_images.load(Ordering::Relaxed)
    }

    /// Tag probabilities for features re-weighted by `map`.
    pub fn probs_with_map(&self, feature: &Tensor, map: &Tensor) -> Result<Tensor> {
        self.recognizer.probs_from_features(&(feature * map)?)
    }

    /// Attention maps of `(B, 1, S, S)` images, one per image.
    pub fn maps(&self, x: &Tensor) -> Result<Tensor> {
        self.font_model_images.fetch_add(x.dim(0)?, Ordering::Relaxed);
        self.attention.map(&self.classifier.distribution(x)?)
    }

    /// Training-mode prediction for one image: the map is the product of the
    /// maps of `set`, a batch of same-font glyphs.
    pub fn predict_with_set(&self, x: &Tensor, set: &Tensor) -> Result<Tensor> {
        let maps = self.maps(set)?;
        let j = maps.dim(0)?;
        let rows: Vec<Tensor> = (0..j).map(|i| maps.narrow(0, i, 1)).collect::<candle_core::Result<_>>()?;
        let b = aggregate_maps(&rows)?;
        let f = self.recognizer.features(x)?;
        self.probs_with_map(&f, &b.broadcast_as(f.dims())?)
    }
}

impl TagPredictor for AttendedRecognizer<'_> {
    fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.recognizer.features(x)?;
        self.probs_with_map(&f, &self.maps(x)?)
    }
}

/// Frozen features and class distributions for every glyph of a bank,
/// row `font * 52 + glyph`.
pub struct FrozenInputs {
    pub features: Tensor,
    pub dists: Tensor,
}

impl FrozenInputs {
    pub fn compute(recognizer: &Recognizer, classifier: &FontClassifier, bank: &GlyphBank, dtype: DType) -> Result<Self> {
        let mut feats = Vec::with_capacity(bank.len());
        let mut dists = Vec::with_capacity(bank.len());
        for font in 0..bank.len() {
            let x = bank.font_batch(font, dtype)?;
            feats.push(recognizer.features(&x)?.detach());
            dists.push(classifier.distribution(&x)?.detach());
        }
        if feats.is_empty() {
            return Err(ModelError::EmptyDataset("no fonts to encode".into()));
        }
        Ok(FrozenInputs {
            features: Tensor::cat(&feats, 0)?,
            dists: Tensor::cat(&dists, 0)?,
        })
    }

    pub fn rows(&self, pairs: &[(usize, usize)]) -> Vec<usize> {
        pairs.iter().map(|&(f, g)| f * GLYPH_COUNT + g).collect()
    }
}

/// Attended tag probabilities from precomputed inputs: one map per glyph
/// (`sets` = None) or the product over each sample's glyph set.
pub fn attended_probs(
    recognizer: &Recognizer,
    attention: &AttentionModule,
    inputs: &FrozenInputs,
    pairs: &[(usize, usize)],
    sets: Option<&[Vec<usize>]>,
) -> Result<Tensor> {
    let f = gather_rows(&inputs.features, &inputs.rows(pairs))?;
    let map = match sets {
        None => attention.map(&gather_rows(&inputs.dists, &inputs.rows(pairs))?)?,
        Some(sets) => {
            let j = sets.first().map(Vec::len).unwrap_or(0);
            if sets.len() != pairs.len() || j == 0 || sets.iter().any(|s| s.len() != j) {
                return Err(ModelError::Shape("one nonempty glyph set of equal size per sample".into()));
            }
            let maps = (0..j)
                .map(|k| {
                    let rows: Vec<(usize, usize)> = pairs.iter().zip(sets).map(|(p, s)| (p.0, s[k])).collect();
                    attention.map(&gather_rows(&inputs.dists, &inputs.rows(&rows))?)
                })
                .collect::<Result<Vec<_>>>()?;
            aggregate_maps(&maps)?
        }
    };
    recognizer.probs_from_features(&(f * map)?)
}

/// `j` glyphs drawn uniformly (with replacement) for every sample.
pub fn sample_glyph_sets(n: usize, j: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| (0..j).map(|_| rng.random_range(0..GLYPH_COUNT)).collect())
        .collect()
}

/// Stage 3: attention layer and tag layer trained on the tag loss over
/// frozen features; J-glyph maps resampled every step.
#[allow(clippy::too_many_arguments)]
pub fn train_stage3(
    store: &mut ParamStore,
    data: &TrainingData,
    recognizer: &Recognizer,
    classifier: &FontClassifier,
    cfg: &AttentionConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(AttentionModule, TrainLog)> {
    train.validate()?;
    let attention = AttentionModule::new(store, classifier.n_classes(), recognizer.backbone.cfg.feature_dim, cfg)?;
    let train_in = FrozenInputs::compute(recognizer, classifier, &data.train, data.dtype)?;
    let val_in = if data.val.is_empty() {
        None
    } else {
        Some(FrozenInputs::compute(recognizer, classifier, &data.val, data.dtype)?)
    };
    let vars: Vec<_> = store
        .vars_with_prefix(&format!("{ATTENTION}."))
        .into_iter()
        .chain(store.vars_with_prefix(&format!("{TAG_HEAD}.")))
        .collect();
    let mut opt = Adam::new(vars, train.fc())?;
    let mut rng = stage_rng(seed, 3);
    let val_pairs = probe_glyphs(data.val.len(), 4, seed);
    let mut log = TrainLog::default();
    let mut step = 0;
    for epoch in 1..=train.stage3_epochs {
        let batches = epoch_batches(data.train.len(), train.glyphs_per_font, train.batch_size, &mut rng)?;
        let mut sum = 0.0;
        for b in &batches {
            let sets = sample_glyph_sets(b.len(), cfg.j, &mut rng);
            let probs = attended_probs(recognizer, &attention, &train_in, b, Some(&sets))?;
            let rows: Vec<usize> = b.iter().map(|p| p.0).collect();
            let loss = tag_loss(&probs, &gather_rows(&data.train_labels, &rows)?)?;
            sum += checked("train-stage3", step, "tag loss", &loss)?;
            opt.step(&loss.backward()?)?;
            step += 1;
        }
        log.push("stage3", epoch, "train", sum / batches.len() as f64, None);
        if let Some(v) = &val_in {
            let probs = attended_probs(recognizer, &attention, v, &val_pairs, None)?;
            let rows: Vec<usize> = val_pairs.iter().map(|p| p.0).collect();
            let loss = tag_loss(&probs, &gather_rows(&data.val_labels, &rows)?)?;
            log.push("stage3", epoch, "val", scalar(&loss)?, None);
        }
    }
    Ok((attention, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn zero_module_gives_half() {
        let mut s = ParamStore::new(DType::F64, 0);
        let cfg = AttentionConfig {
            init_sigma: 0.0,
            ..Default::default()
        };
        let a = AttentionModule::new(&mut s, 4, 3, &cfg).unwrap();
        let d = Tensor::new(&[[0.25f64, 0.25, 0.25, 0.25]], &Device::Cpu).unwrap();
        assert_eq!(a.map(&d).unwrap().to_vec2::<f64>().unwrap(), [[0.5; 3]]);
        assert!(a.map(&Tensor::zeros((1, 3), DType::F64, &Device::Cpu).unwrap()).is_err());
    }

    #[test]
    fn aggregation_fixtures() {
        assert_eq!(aggregate_attention(&[vec![0.5; 3], vec![0.5; 3]]).unwrap(), [0.25; 3]);
        assert_eq!(aggregate_attention(&[vec![0.3, 0.7]]).unwrap(), [0.3, 0.7]);
        assert!(aggregate_attention(&[]).is_err());
        assert!(aggregate_attention(&[vec![0.5], vec![0.5, 0.5]]).is_err());
    }
}
