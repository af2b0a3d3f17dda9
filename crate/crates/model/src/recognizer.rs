//! Tag recognition: residual CNN backbone, sigmoid tag head, the separate
//! softmax font classifier, and their training loops.

use candle_core::{DType, Tensor, Var, D};
use glyphtag_core::GLYPH_COUNT;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{BackboneConfig, TrainConfig};
use crate::data::{epoch_batches, GlyphBank, TrainingData};
use crate::error::{ModelError, Result};
use crate::layers::{global_avg_pool, he_std, sigmoid, Conv, Dense};
use crate::params::ParamStore;
use crate::train::{checked, gather_rows, scalar, Adam, TrainLog};

pub const BACKBONE: &str = "backbone";
pub const TAG_HEAD: &str = "tag_head";
pub const FONT_CLS: &str = "font_cls";

/// Probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]` in the loss.
pub const PROB_CLAMP: f64 = 1e-7;

struct Stage {
    down: Conv,
    c1: Conv,
    c2: Conv,
}

/// Glyph image to a non-negative `feature_dim` vector.
pub struct Backbone {
    stem: Conv,
    stages: Vec<Stage>,
    fc: Dense,
    pub cfg: BackboneConfig,
}

impl Backbone {
    pub fn new(store: &mut ParamStore, prefix: &str, cfg: &BackboneConfig) -> Result<Self> {
        cfg.validate()?;
        let w0 = cfg.widths[0];
        let stem = Conv::new(store, &format!("{prefix}.stem"), 1, w0, 3, 1, 1, 1.0)?;
        let mut stages = Vec::new();
        let mut cin = w0;
        for (i, &w) in cfg.widths.iter().enumerate() {
            let p = format!("{prefix}.stage{i}");
            stages.push(Stage {
                down: Conv::new(store, &format!("{p}.down"), cin, w, 3, 2, 1, 1.0)?,
                c1: Conv::new(store, &format!("{p}.res1"), w, w, 3, 1, 1, 1.0)?,
                c2: Conv::new(store, &format!("{p}.res2"), w, w, 3, 1, 1, 1.0)?,
            });
            cin = w;
        }
        let fc = Dense::new(store, &format!("{prefix}.fc"), cin, cfg.feature_dim, he_std(cin))?;
        Ok(Backbone {
            stem,
            stages,
            fc,
            cfg: cfg.clone(),
        })
    }

    /// `(B, 1, S, S)` glyph pixels (white = 1) to `(B, D)` features.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = self.cfg.image_size;
        match x.dims() {
            [_, 1, h, w] if *h == s && *w == s => {}
            other => {
                return Err(ModelError::Shape(format!(
                    "backbone expects (B, 1, {s}, {s}) images, got {other:?}"
                )))
            }
        }
        let ink = x.affine(-1.0, 1.0)?;
        let mut h = self.stem.forward(&ink)?.relu()?;
        for st in &self.stages {
            h = st.down.forward(&h)?.relu()?;
            let r = st.c2.forward(&st.c1.forward(&h)?.relu()?)?;
            h = (h + r.affine(self.cfg.residual_scale, 0.0)?)?.relu()?;
        }
        Ok(self.fc.forward(&global_avg_pool(&h)?)?.relu()?)
    }
}

/// Backbone plus the N-way sigmoid tag layer.
pub struct Recognizer {
    pub backbone: Backbone,
    pub head: Dense,
}

impl Recognizer {
    pub fn new(store: &mut ParamStore, cfg: &BackboneConfig, n_tags: usize) -> Result<Self> {
        let backbone = Backbone::new(store, BACKBONE, cfg)?;
        let head = Dense::new(store, TAG_HEAD, cfg.feature_dim, n_tags, he_std(cfg.feature_dim) * 0.5)?;
        Ok(Recognizer { backbone, head })
    }

    pub fn n_tags(&self) -> usize {
        self.head.out_dim()
    }

    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        self.backbone.forward(x)
    }

    pub fn probs_from_features(&self, f: &Tensor) -> Result<Tensor> {
        if f.dim(D::Minus1)? != self.head.in_dim() {
            return Err(ModelError::Shape(format!(
                "feature length {} != {}",
                f.dim(D::Minus1)?,
                self.head.in_dim()
            )));
        }
        sigmoid(&self.head.forward(f)?)
    }
}

/// Anything that maps a batch of glyph images to `(B, N)` tag probabilities.
pub trait TagPredictor {
    fn predict(&self, x: &Tensor) -> Result<Tensor>;
}

impl TagPredictor for Recognizer {
    fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.probs_from_features(&self.features(x)?)
    }
}

/// Multi-label cross-entropy: summed over tags, averaged over the batch.
pub fn tag_loss(probs: &Tensor, labels: &Tensor) -> Result<Tensor> {
    if probs.dims() != labels.dims() {
        return Err(ModelError::Shape(format!(
            "probabilities {:?} vs labels {:?}",
            probs.dims(),
            labels.dims()
        )));
    }
    let p = probs.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)?;
    let pos = (labels * p.log()?)?;
    let neg = (labels.affine(-1.0, 1.0)? * p.affine(-1.0, 1.0)?.log()?)?;
    let per_sample = (pos + neg)?.sum(D::Minus1)?;
    Ok(per_sample.mean_all()?.neg()?)
}

/// Softmax cross-entropy from logits against class indices.
pub fn font_class_loss(logits: &Tensor, classes: &[usize]) -> Result<Tensor> {
    let n = logits.dim(D::Minus1)?;
    if let Some(&c) = classes.iter().find(|&&c| c >= n) {
        return Err(ModelError::Shape(format!("font class {c} outside {n} classes")));
    }
    let idx: Vec<u32> = classes.iter().map(|&c| c as u32).collect();
    let idx = Tensor::from_vec(idx, classes.len(), logits.device())?;
    Ok(candle_nn::loss::cross_entropy(logits, &idx)?)
}

/// Separate backbone with a softmax over the training fonts.
pub struct FontClassifier {
    pub backbone: Backbone,
    pub head: Dense,
}

impl FontClassifier {
    pub fn new(store: &mut ParamStore, cfg: &BackboneConfig, n_classes: usize) -> Result<Self> {
        let backbone = Backbone::new(store, &format!("{FONT_CLS}.{BACKBONE}"), cfg)?;
        let head = Dense::new(
            store,
            &format!("{FONT_CLS}.head"),
            cfg.feature_dim,
            n_classes,
            he_std(cfg.feature_dim) * 0.5,
        )?;
        Ok(FontClassifier { backbone, head })
    }

    pub fn n_classes(&self) -> usize {
        self.head.out_dim()
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.head.forward(&self.backbone.forward(x)?)
    }

    /// `(B, M)` class distributions.
    pub fn distribution(&self, x: &Tensor) -> Result<Tensor> {
        Ok(candle_nn::ops::softmax_last_dim(&self.logits(x)?)?)
    }
}

pub(crate) fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}


/// Fixed glyph subset used to score held-out losses each epoch.
pub(crate) fn probe_glyphs(n_fonts: usize, per_font: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = stage_rng(seed, 99);
    (0..n_fonts)
        .flat_map(|f| (0..per_font).map(move |_| f))
        .map(|f| (f, rng.random_range(0..GLYPH_COUNT)))
        .collect()
}

/// Mean tag loss over `(font, glyph)` pairs in inference mode.
pub fn mean_tag_loss(
    model: &impl TagPredictor,
    bank: &GlyphBank,
    labels: &Tensor,
    pairs: &[(usize, usize)],
    dtype: DType,
) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in pairs.chunks(64) {
        let x = bank.batch(chunk, dtype)?;
        let rows: Vec<usize> = chunk.iter().map(|p| p.0).collect();
        let y = gather_rows(labels, &rows)?;
        total += scalar(&tag_loss(&model.predict(&x)?, &y)?)? * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Every glyph of every font in `bank`.
pub fn all_pairs(bank: &GlyphBank) -> Vec<(usize, usize)> {
    (0..bank.len())
        .flat_map(|f| (0..GLYPH_COUNT).map(move |g| (f, g)))
        .collect()
}

/// Stage 1: backbone and tag layer trained on the tag loss.
pub fn train_stage1(
    store: &mut ParamStore,
    data: &TrainingData,
    cfg: &BackboneConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<TrainLog> {
    train_stage1_until(store, data, cfg, train, seed, |_, _| false)
}

/// Stage 1 with an early-exit predicate evaluated after every epoch on
/// `(epoch, model)`.
pub fn train_stage1_until(
    store: &mut ParamStore,
    data: &TrainingData,
    cfg: &BackboneConfig,
    train: &TrainConfig,
    seed: u64,
    mut done: impl FnMut(usize, &Recognizer) -> bool,
) -> Result<TrainLog> {
    train.validate()?;
    let model = Recognizer::new(store, cfg, data.n_tags())?;
    let mut opt_cnn = Adam::new(store.vars_with_prefix(&format!("{BACKBONE}.")), train.cnn())?;
    let mut opt_fc = Adam::new(store.vars_with_prefix(&format!("{TAG_HEAD}.")), train.fc())?;
    let mut rng = stage_rng(seed, 1);
    let val_pairs = probe_glyphs(data.val.len(), 4, seed);
    let mut log = TrainLog::default();
    let mut step = 0;
    for epoch in 1..=train.stage1_epochs {
        let batches = epoch_batches(data.train.len(), train.glyphs_per_font, train.batch_size, &mut rng)?;
        let mut sum = 0.0;
        for b in &batches {
            let x = data.train.batch(b, data.dtype)?;
            let rows: Vec<usize> = b.iter().map(|p| p.0).collect();
            let y = gather_rows(&data.train_labels, &rows)?;
            let loss = tag_loss(&model.predict(&x)?, &y)?;
            sum += checked("train-stage1", step, "tag loss", &loss)?;
            let grads = loss.backward()?;
            opt_cnn.step(&grads)?;
            opt_fc.step(&grads)?;
            step += 1;
        }
        log.push("stage1", epoch, "train", sum / batches.len() as f64, None);
        if !val_pairs.is_empty() {
            let v = mean_tag_loss(&model, &data.val, &data.val_labels, &val_pairs, data.dtype)?;
            log.push("stage1", epoch, "val", v, None);
        }
        if done(epoch, &model) {
            break;
        }
    }
    Ok(log)
}

/// Per-glyph probabilities `[52][N]` for one font of `bank`.
pub fn glyph_probabilities(
    model: &impl TagPredictor,
    bank: &GlyphBank,
    font: usize,
    dtype: DType,
) -> Result<Vec<Vec<f64>>> {
    let x = bank.font_batch(font, dtype)?;
    Ok(model.predict(&x)?.to_dtype(DType::F64)?.to_vec2::<f64>()?)
}

/// Arithmetic mean of per-glyph probability vectors.
pub fn font_tag_probabilities(glyph_probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = glyph_probs
        .first()
        .ok_or_else(|| ModelError::EmptyDataset("no glyph probabilities".into()))?;
    let mut acc = vec![0.0; first.len()];
    for p in glyph_probs {
        if p.len() != acc.len() {
            return Err(ModelError::Shape("ragged glyph probabilities".into()));
        }
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let n = glyph_probs.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Values of `vars`, for restoring a best epoch later.
pub(crate) fn snapshot(vars: &[Var]) -> Result<Vec<Tensor>> {
    vars.iter().map(|v| Ok(v.as_tensor().copy()?)).collect()
}

pub(crate) fn restore(vars: &[Var], values: &[Tensor]) -> Result<()> {
    for (v, t) in vars.iter().zip(values) {
        v.set(t)?;
    }
    Ok(())
}

/// Top-1 accuracy of the classifier over `pairs` of the training bank.
pub fn classifier_accuracy(model: &FontClassifier, bank: &GlyphBank, pairs: &[(usize, usize)], dtype: DType) -> Result<f64> {
    let mut correct = 0usize;
    for chunk in pairs.chunks(64) {
        let x = bank.batch(chunk, dtype)?;
        let pred = model.logits(&x)?.argmax(D::Minus1)?.to_vec1::<u32>()?;
        correct += pred
            .iter()
            .zip(chunk)
            .filter(|(p, (f, _))| **p as usize == *f)
            .count();
    }
    Ok(correct as f64 / pairs.len().max(1) as f64)
}

/// Font classifier over the training fonts, early-stopped on accuracy over
/// a fixed probe set of their glyphs; the best epoch's weights are kept.
pub fn train_font_classifier(
    store: &mut ParamStore,
    data: &TrainingData,
    cfg: &BackboneConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(TrainLog, f64)> {
    train.validate()?;
    let model = FontClassifier::new(store, cfg, data.train.len())?;
    let cnn_vars = store.vars_with_prefix(&format!("{FONT_CLS}.{BACKBONE}."));
    let head_vars = store.vars_with_prefix(&format!("{FONT_CLS}.head."));
    let all_vars: Vec<Var> = cnn_vars.iter().chain(&head_vars).cloned().collect();
    let mut opt_cnn = Adam::new(cnn_vars, train.cnn())?;
    let mut opt_fc = Adam::new(head_vars, train.fc())?;
    let mut rng = stage_rng(seed, 5);
    let probe = probe_glyphs(data.train.len(), 8, seed ^ 5);
    let mut best = (classifier_accuracy(&model, &data.train, &probe, data.dtype)?, snapshot(&all_vars)?);
    let mut since_best = 0;
    let mut log = TrainLog::default();
    let mut step = 0;
    for epoch in 1..=train.classifier_epochs {
        let batches = epoch_batches(data.train.len(), train.glyphs_per_font, train.batch_size, &mut rng)?;
        let mut sum = 0.0;
        for b in &batches {
            let x = data.train.batch(b, data.dtype)?;
            let classes: Vec<usize> = b.iter().map(|p| p.0).collect();
            let loss = font_class_loss(&model.logits(&x)?, &classes)?;
            sum += checked("font-classifier", step, "class loss", &loss)?;
            let grads = loss.backward()?;
            opt_cnn.step(&grads)?;
            opt_fc.step(&grads)?;
            step += 1;
        }
        let acc = classifier_accuracy(&model, &data.train, &probe, data.dtype)?;
        log.push("font_classifier", epoch, "train", sum / batches.len() as f64, Some(acc));
        if acc > best.0 {
            best = (acc, snapshot(&all_vars)?);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if best.0 >= 1.0 || since_best >= train.classifier_patience {
            break;
        }
    }
    restore(&all_vars, &best.1)?;
    Ok((log, best.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    #[test]
    fn bce_fixture() {
        let p = Tensor::new(&[[0.5f64, 0.5]], &Device::Cpu).unwrap();
        let y = Tensor::new(&[[1f64, 0.0]], &Device::Cpu).unwrap();
        let l = scalar(&tag_loss(&p, &y).unwrap()).unwrap();
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bce_at_perfect_prediction_is_clamped_near_zero() {
        let p = Tensor::new(&[[1f64, 0.0, 1.0]], &Device::Cpu).unwrap();
        let l = scalar(&tag_loss(&p, &p).unwrap()).unwrap();
        assert!(l > 0.0 && l < 1e-6, "{l}");
    }

    #[test]
    fn class_loss_uniform_logits() {
        let z = Tensor::zeros((1, 4), DType::F64, &Device::Cpu).unwrap();
        let l = scalar(&font_class_loss(&z, &[2]).unwrap()).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!(font_class_loss(&z, &[4]).is_err());
    }

    #[test]
    fn zero_feature_gives_half() {
        let mut s = ParamStore::new(DType::F32, 0);
        let cfg = BackboneConfig {
            image_size: 16,
            widths: vec![4, 8],
            feature_dim: 6,
            ..Default::default()
        };
        let r = Recognizer::new(&mut s, &cfg, 3).unwrap();
        let f = Tensor::zeros((2, 6), DType::F32, &Device::Cpu).unwrap();
        let p = r.probs_from_features(&f).unwrap().to_vec2::<f32>().unwrap();
        assert!(p.iter().flatten().all(|&v| v == 0.5));
        assert!(r.probs_from_features(&Tensor::zeros((2, 5), DType::F32, &Device::Cpu).unwrap()).is_err());
        let bad = Tensor::zeros((1, 1, 8, 8), DType::F32, &Device::Cpu).unwrap();
        assert!(r.features(&bad).is_err());
    }

    #[test]
    fn mean_of_glyph_probabilities() {
        let m = font_tag_probabilities(&[vec![0.2, 0.5], vec![0.4, 0.5]]).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-15);
        assert_eq!(m[1], 0.5);
        assert!(font_tag_probabilities(&[]).is_err());
    }
}
