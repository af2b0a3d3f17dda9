//! Generative feature learning: a conditional U-Net generator that redraws a
//! standard-font glyph in the style encoded by a hidden feature, a patch
//! discriminator, and the two-phase stage-2 schedule.

use candle_core::{DType, Tensor, D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{GanConfig, TrainConfig};
use crate::data::{epoch_batches, GlyphBank, TrainingData};
use crate::error::{ModelError, Result};
use crate::layers::{dropout, leaky_relu, sigmoid, softplus, Conv, ConvT};
use crate::params::ParamStore;
use crate::recognizer::{
    mean_tag_loss, probe_glyphs, stage_rng, tag_loss, Recognizer, TagPredictor, BACKBONE, TAG_HEAD,
};
use crate::train::{checked, gather_rows, scalar, Adam, TrainLog};

pub const GEN: &str = "gen";
pub const DISC: &str = "disc";

/// Decoder blocks (counted from the bottleneck) that apply dropout.
const DROPOUT_BLOCKS: usize = 3;

fn width(base: usize, max: usize, level: usize) -> usize {
    (base << level).min(max)
}

/// Encoder-decoder with skip connections; the conditioning feature is tiled
/// over the 4x4 bottleneck and concatenated to it.
pub struct Generator {
    enc: Vec<Conv>,
    dec: Vec<ConvT>,
    pub image_size: usize,
    pub feature_dim: usize,
    pub dropout_rate: f64,
}

impl Generator {
    pub fn new(store: &mut ParamStore, cfg: &GanConfig, image_size: usize, feature_dim: usize) -> Result<Self> {
        cfg.validate(image_size)?;
        let levels = (image_size / 4).trailing_zeros() as usize;
        let ch: Vec<usize> = std::iter::once(1)
            .chain((0..levels).map(|i| width(cfg.gen_base, cfg.gen_max, i)))
            .collect();
        let mut enc = Vec::new();
        for i in 1..=levels {
            enc.push(Conv::new(store, &format!("{GEN}.enc{i}"), ch[i - 1], ch[i], 4, 2, 1, 1.0)?);
        }
        let mut dec = Vec::new();
        let mut cin = ch[levels] + feature_dim;
        for i in (1..=levels).rev() {
            let cout = ch[i - 1];
            dec.push(ConvT::new(store, &format!("{GEN}.dec{i}"), cin, cout, 4, 2, 1, 1.0)?);
            cin = 2 * cout;
        }
        Ok(Generator {
            enc,
            dec,
            image_size,
            feature_dim,
            dropout_rate: cfg.dropout_rate,
        })
    }

    /// `feature (B, D)` and standard glyphs `(B, 1, S, S)` to generated
    /// glyphs in `[0, 1]`. Dropout is active only when `rng` is given.
    pub fn forward(&self, feature: &Tensor, standard: &Tensor, mut rng: Option<&mut ChaCha8Rng>) -> Result<Tensor> {
        let (b, d) = feature.dims2()?;
        if d != self.feature_dim {
            return Err(ModelError::Shape(format!("feature length {d} != {}", self.feature_dim)));
        }
        let s = self.image_size;
        if standard.dims() != [b, 1, s, s] {
            return Err(ModelError::Shape(format!(
                "standard glyphs {:?}, expected ({b}, 1, {s}, {s})",
                standard.dims()
            )));
        }
        let mut skips = vec![standard.clone()];
        let mut h = standard.clone();
        for (i, conv) in self.enc.iter().enumerate() {
            h = conv.forward(&h)?;
            if i + 1 < self.enc.len() {
                h = leaky_relu(&h, 0.2)?;
            } else {
                h = h.relu()?;
            }
            skips.push(h.clone());
        }
        let tiled = feature.reshape((b, d, 1, 1))?.broadcast_as((b, d, 4, 4))?.contiguous()?;
        h = Tensor::cat(&[&h, &tiled], 1)?;
        let n = self.dec.len();
        for (k, up) in self.dec.iter().enumerate() {
            let y = up.forward(&h)?;
            if k + 1 == n {
                return sigmoid(&y);
            }
            let mut y = y.relu()?;
            if k < DROPOUT_BLOCKS {
                if let Some(r) = rng.as_deref_mut() {
                    y = dropout(&y, self.dropout_rate, r)?;
                }
            }
            h = Tensor::cat(&[&y, &skips[n - 1 - k]], 1)?;
        }
        unreachable!("generator has at least one decoder block")
    }
}

/// Patch discriminator over `(candidate, standard)` pairs.
pub struct Discriminator {
    layers: Vec<Conv>,
    pub image_size: usize,
    pub patch_grid: usize,
}

impl Discriminator {
    pub fn new(store: &mut ParamStore, cfg: &GanConfig, image_size: usize) -> Result<Self> {
        let pg = cfg.patch_grid;
        let ratio = image_size / (pg + 2);
        if pg == 0 || ratio == 0 || !image_size.is_multiple_of(pg + 2) || !ratio.is_power_of_two() {
            return Err(ModelError::Config(format!(
                "image_size {image_size} / (patch_grid {pg} + 2) must be a power of two"
            )));
        }
        let strided = ratio.trailing_zeros() as usize;
        let plain = 2usize.saturating_sub(strided);
        let mut layers = Vec::new();
        let mut cin = 2;
        for i in 0..strided + plain {
            let cout = width(cfg.disc_base, cfg.disc_max, i);
            let name = format!("{DISC}.conv{i}");
            layers.push(if i < strided {
                Conv::new(store, &name, cin, cout, 4, 2, 1, 1.0)?
            } else {
                Conv::new(store, &name, cin, cout, 3, 1, 1, 1.0)?
            });
            cin = cout;
        }
        layers.push(Conv::new(store, &format!("{DISC}.out"), cin, 1, 3, 1, 0, 1.0)?);
        Ok(Discriminator {
            layers,
            image_size,
            patch_grid: pg,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// `(B, pg, pg)` real-vs-fake logits.
    pub fn logits(&self, candidate: &Tensor, standard: &Tensor) -> Result<Tensor> {
        let s = self.image_size;
        let b = candidate.dim(0)?;
        if candidate.dims() != [b, 1, s, s] || standard.dims() != candidate.dims() {
            return Err(ModelError::Shape(format!(
                "discriminator inputs {:?} and {:?}, expected (B, 1, {s}, {s})",
                candidate.dims(),
                standard.dims()
            )));
        }
        let mut h = Tensor::cat(&[candidate, standard], 1)?;
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(&h)?;
            if i < last {
                h = leaky_relu(&h, 0.2)?;
            }
        }
        Ok(h.squeeze(1)?)
    }

    /// Patch scores in `(0, 1)`.
    pub fn scores(&self, candidate: &Tensor, standard: &Tensor) -> Result<Tensor> {
        sigmoid(&self.logits(candidate, standard)?)
    }
}

/// `-[log D(real) + log(1 - D(fake))]`, each term averaged over patches.
pub fn d_loss(real_logits: &Tensor, fake_logits: &Tensor) -> Result<Tensor> {
    let real = softplus(&real_logits.neg()?)?.mean_all()?;
    let fake = softplus(fake_logits)?.mean_all()?;
    Ok((real + fake)?)
}

/// Non-saturating generator term `-log D(fake)`, averaged over patches.
pub fn g_adv_loss(fake_logits: &Tensor) -> Result<Tensor> {
    Ok(softplus(&fake_logits.neg()?)?.mean_all()?)
}

pub fn l1_loss(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    Ok((a - b)?.abs()?.mean_all()?)
}

/// Generator objective: adversarial term plus `lambda` times L1.
pub fn lgan_loss(fake_logits: &Tensor, fake: &Tensor, real: &Tensor, lambda: f64) -> Result<Tensor> {
    Ok((g_adv_loss(fake_logits)? + l1_loss(fake, real)?.affine(lambda, 0.0)?)?)
}

/// Generator, discriminator and the recognizer they are attached to.
pub struct GanModels {
    pub recognizer: Recognizer,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub cfg: GanConfig,
}

impl GanModels {
    pub fn new(store: &mut ParamStore, recognizer: Recognizer, cfg: &GanConfig) -> Result<Self> {
        let s = recognizer.backbone.cfg.image_size;
        let d = recognizer.backbone.cfg.feature_dim;
        Ok(GanModels {
            generator: Generator::new(store, cfg, s, d)?,
            discriminator: Discriminator::new(store, cfg, s)?,
            recognizer,
            cfg: cfg.clone(),
        })
    }
}

/// One generation sample: glyph `source` of `font` supplies the feature,
/// glyph `target` is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenPair {
    pub font: usize,
    pub source: usize,
    pub target: usize,
}

/// Pairs for a batch of `(font, target)` samples with independently drawn
/// source glyphs.
pub fn gen_pairs(batch: &[(usize, usize)], rng: &mut impl Rng) -> Vec<GenPair> {
    batch
        .iter()
        .map(|&(font, target)| GenPair {
            font,
            source: rng.random_range(0..glyphtag_core::GLYPH_COUNT),
            target,
        })
        .collect()
}

struct PairTensors {
    source: Tensor,
    target: Tensor,
    standard: Tensor,
}

fn pair_tensors(bank: &GlyphBank, pairs: &[GenPair], dtype: DType) -> Result<PairTensors> {
    let src: Vec<(usize, usize)> = pairs.iter().map(|p| (p.font, p.source)).collect();
    let tgt: Vec<(usize, usize)> = pairs.iter().map(|p| (p.font, p.target)).collect();
    let std: Vec<usize> = pairs.iter().map(|p| p.target).collect();
    Ok(PairTensors {
        source: bank.batch(&src, dtype)?,
        target: bank.batch(&tgt, dtype)?,
        standard: bank.standard_batch(&std, dtype)?,
    })
}

/// Mean L1 between generated and true glyphs, dropout off.
pub fn mean_reconstruction_l1(models: &GanModels, bank: &GlyphBank, pairs: &[GenPair], dtype: DType) -> Result<f64> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyDataset("no reconstruction pairs".into()));
    }
    let mut total = 0.0;
    for chunk in pairs.chunks(64) {
        let t = pair_tensors(bank, chunk, dtype)?;
        let f = models.recognizer.features(&t.source)?;
        let fake = models.generator.forward(&f, &t.standard, None)?;
        total += scalar(&l1_loss(&fake, &t.target)?)? * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Fixed pairs for tracking reconstruction quality across epochs.
pub fn probe_pairs(n_fonts: usize, per_font: usize, seed: u64) -> Vec<GenPair> {
    let mut rng = stage_rng(seed, 98);
    (0..n_fonts)
        .flat_map(|f| std::iter::repeat_n(f, per_font))
        .map(|font| GenPair {
            font,
            source: rng.random_range(0..glyphtag_core::GLYPH_COUNT),
            target: rng.random_range(0..glyphtag_core::GLYPH_COUNT),
        })
        .collect()
}

/// Optimizer state for stage 2.
pub struct Stage2Trainer {
    opt_gen: Adam,
    opt_disc: Adam,
    opt_cnn_gan: Adam,
    opt_cnn_tag: Adam,
    opt_head: Adam,
    rng: ChaCha8Rng,
    step: usize,
}

/// Phase-A stopping rule: the smoothed L1 must keep improving by at least
/// `min_improvement` (relative) or the phase ends after `patience` stalls.
#[derive(Debug, Clone)]
pub struct Convergence {
    min_improvement: f64,
    patience: usize,
    smoothed: Option<f64>,
    stalls: usize,
}

impl Convergence {
    pub fn new(min_improvement: f64, patience: usize) -> Self {
        Convergence {
            min_improvement,
            patience,
            smoothed: None,
            stalls: 0,
        }
    }

    /// Feeds one epoch's L1; true once converged.
    pub fn update(&mut self, l1: f64) -> bool {
        let next = match self.smoothed {
            None => l1,
            Some(prev) => {
                let s = 0.5 * prev + 0.5 * l1;
                if prev - s < self.min_improvement * prev {
                    self.stalls += 1;
                } else {
                    self.stalls = 0;
                }
                s
            }
        };
        self.smoothed = Some(next);
        self.patience > 0 && self.stalls >= self.patience
    }

    pub fn smoothed(&self) -> Option<f64> {
        self.smoothed
    }
}

impl Stage2Trainer {
    pub fn new(store: &ParamStore, gan: &GanConfig, train: &TrainConfig, seed: u64) -> Result<Self> {
        train.validate()?;
        let cnn = || store.vars_with_prefix(&format!("{BACKBONE}."));
        Ok(Stage2Trainer {
            opt_gen: Adam::with_betas(store.vars_with_prefix(&format!("{GEN}.")), train.gan(), 0.5, 0.999)?,
            opt_disc: Adam::with_betas(store.vars_with_prefix(&format!("{DISC}.")), train.gan(), 0.5, 0.999)?,
            // Adam is invariant to a constant loss weight, so beta scales
            // the step size of the backbone update instead.
            opt_cnn_gan: Adam::new(cnn(), (gan.beta * train.cnn()).max(f64::MIN_POSITIVE))?,
            opt_cnn_tag: Adam::new(cnn(), train.cnn())?,
            opt_head: Adam::new(store.vars_with_prefix(&format!("{TAG_HEAD}.")), train.fc())?,
            rng: stage_rng(seed, 2),
            step: 0,
        })
    }

    /// One G/D update. With `tune_backbone` the feature stays attached and
    /// the backbone also takes a step on the generator objective.
    fn gan_step(
        &mut self,
        models: &GanModels,
        bank: &GlyphBank,
        batch: &[(usize, usize)],
        dtype: DType,
        tune_backbone: bool,
    ) -> Result<(f64, f64, f64)> {
        let pairs = gen_pairs(batch, &mut self.rng);
        let t = pair_tensors(bank, &pairs, dtype)?;
        let mut f = models.recognizer.features(&t.source)?;
        if !tune_backbone {
            f = f.detach();
        }
        let fake = models.generator.forward(&f, &t.standard, Some(&mut self.rng))?;

        let dl = d_loss(
            &models.discriminator.logits(&t.target, &t.standard)?,
            &models.discriminator.logits(&fake.detach(), &t.standard)?,
        )?;
        let dv = checked("train-stage2", self.step, "discriminator loss", &dl)?;
        self.opt_disc.step(&dl.backward()?)?;

        let fake_logits = models.discriminator.logits(&fake, &t.standard)?;
        let adv = g_adv_loss(&fake_logits)?;
        let l1 = l1_loss(&fake, &t.target)?;
        let g = (&adv + l1.affine(models.cfg.lambda_l1, 0.0)?)?;
        checked("train-stage2", self.step, "generator loss", &g)?;
        let grads = g.backward()?;
        self.opt_gen.step(&grads)?;
        if tune_backbone {
            self.opt_cnn_gan.step(&grads)?;
        }
        self.step += 1;
        Ok((dv, scalar(&adv)?, scalar(&l1)?))
    }

    /// One epoch of G/D training with the recognizer untouched. Returns mean
    /// `(d_loss, g_adv, l1)`.
    pub fn phase_a_epoch(&mut self, models: &GanModels, data: &TrainingData, train: &TrainConfig) -> Result<(f64, f64, f64)> {
        self.gan_epoch(models, data, train, false)
    }

    /// First sub-epoch: G, D and the backbone (not the tag layer) trained on
    /// the generator objective.
    pub fn sub_epoch_gan(&mut self, models: &GanModels, data: &TrainingData, train: &TrainConfig) -> Result<(f64, f64, f64)> {
        self.gan_epoch(models, data, train, true)
    }

    fn gan_epoch(
        &mut self,
        models: &GanModels,
        data: &TrainingData,
        train: &TrainConfig,
        tune_backbone: bool,
    ) -> Result<(f64, f64, f64)> {
        let batches = epoch_batches(data.train.len(), train.glyphs_per_font, train.batch_size, &mut self.rng)?;
        let mut sum = (0.0, 0.0, 0.0);
        for b in &batches {
            let (d, g, l) = self.gan_step(models, &data.train, b, data.dtype, tune_backbone)?;
            sum = (sum.0 + d, sum.1 + g, sum.2 + l);
        }
        let n = batches.len() as f64;
        Ok((sum.0 / n, sum.1 / n, sum.2 / n))
    }

    /// Second sub-epoch: backbone and tag layer trained on the tag loss.
    pub fn sub_epoch_tags(&mut self, models: &GanModels, data: &TrainingData, train: &TrainConfig) -> Result<f64> {
        let batches = epoch_batches(data.train.len(), train.glyphs_per_font, train.batch_size, &mut self.rng)?;
        let mut sum = 0.0;
        for b in &batches {
            let x = data.train.batch(b, data.dtype)?;
            let rows: Vec<usize> = b.iter().map(|p| p.0).collect();
            let y = gather_rows(&data.train_labels, &rows)?;
            let loss = tag_loss(&models.recognizer.predict(&x)?, &y)?;
            sum += checked("train-stage2", self.step, "tag loss", &loss)?;
            let grads = loss.backward()?;
            self.opt_cnn_tag.step(&grads)?;
            self.opt_head.step(&grads)?;
            self.step += 1;
        }
        Ok(sum / batches.len() as f64)
    }
}

/// Stage 2: phase A trains the GAN on frozen features until the smoothed L1
/// stalls; phase B alternates GAN-driven and tag-driven sub-epochs.
pub fn train_stage2(
    store: &mut ParamStore,
    data: &TrainingData,
    models: &GanModels,
    train: &TrainConfig,
    seed: u64,
) -> Result<TrainLog> {
    let mut trainer = Stage2Trainer::new(store, &models.cfg, train, seed)?;
    let mut log = TrainLog::default();
    let mut conv = Convergence::new(train.phase_a_min_improvement, train.phase_a_patience);
    for epoch in 1..=train.phase_a_max_epochs {
        let (d, g, l1) = trainer.phase_a_epoch(models, data, train)?;
        log.push("stage2a", epoch, "d", d, None);
        log.push("stage2a", epoch, "g_adv", g, None);
        log.push("stage2a", epoch, "l1", l1, None);
        if conv.update(l1) {
            break;
        }
    }
    let val_pairs = probe_glyphs(data.val.len(), 4, seed);
    for epoch in 1..=train.phase_b_epochs {
        let (_, g, l1) = trainer.sub_epoch_gan(models, data, train)?;
        log.push("stage2b", epoch, "lgan", g + models.cfg.lambda_l1 * l1, None);
        let c = trainer.sub_epoch_tags(models, data, train)?;
        log.push("stage2b", epoch, "train", c, None);
        if !val_pairs.is_empty() {
            let v = mean_tag_loss(&models.recognizer, &data.val, &data.val_labels, &val_pairs, data.dtype)?;
            log.push("stage2b", epoch, "val", v, None);
        }
    }
    Ok(log)
}

/// Which attention weights choose the kept feature nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskMode {
    /// `k` highest weights of the glyph's own map.
    Top,
    /// `k` lowest weights of the glyph's own map.
    Bottom,
    /// `k` highest weights of another glyph's map.
    Cross,
}

impl std::str::FromStr for MaskMode {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top" => Ok(MaskMode::Top),
            "bottom" => Ok(MaskMode::Bottom),
            "cross" => Ok(MaskMode::Cross),
            other => Err(ModelError::Config(format!("unknown mask mode `{other}` (top, bottom, cross)"))),
        }
    }
}

/// 0/1 mask keeping `k` feature nodes selected by `mode`. Ties go to the
/// lower index.
pub fn feature_mask(own: &[f64], other: Option<&[f64]>, k: usize, mode: MaskMode) -> Result<Vec<f64>> {
    let d = own.len();
    if k > d {
        return Err(ModelError::Config(format!("k = {k} exceeds feature length {d}")));
    }
    let (weights, highest) = match mode {
        MaskMode::Top => (own, true),
        MaskMode::Bottom => (own, false),
        MaskMode::Cross => {
            let o = other.ok_or_else(|| ModelError::Config("cross mode needs a second attention map".into()))?;
            if o.len() != d {
                return Err(ModelError::Shape(format!("attention maps of length {d} and {}", o.len())));
            }
            (o, true)
        }
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        let c = weights[a].total_cmp(&weights[b]);
        let c = if highest { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
    let mut mask = vec![0.0; d];
    for &i in &order[..k] {
        mask[i] = 1.0;
    }
    Ok(mask)
}

/// Generates glyph `standard` from `feature` with all but the selected
/// nodes zeroed.
pub fn masked_reconstruction(
    generator: &Generator,
    feature: &[f64],
    standard: &Tensor,
    own: &[f64],
    other: Option<&[f64]>,
    k: usize,
    mode: MaskMode,
) -> Result<Tensor> {
    if feature.len() != own.len() {
        return Err(ModelError::Shape(format!(
            "feature length {} vs attention length {}",
            feature.len(),
            own.len()
        )));
    }
    let mask = feature_mask(own, other, k, mode)?;
    let masked: Vec<f64> = feature.iter().zip(&mask).map(|(f, m)| f * m).collect();
    let f = Tensor::from_vec(masked, (1, feature.len()), standard.device())?.to_dtype(standard.dtype())?;
    generator.forward(&f, standard, None)
}

/// Mean over glyphs of an `(B, 1, S, S)` tensor's per-sample L1 to `target`.
pub fn per_sample_l1(a: &Tensor, target: &Tensor) -> Result<Vec<f64>> {
    Ok((a - target)?
        .abs()?
        .flatten_from(1)?
        .mean(D::Minus1)?
        .to_dtype(DType::F64)?
        .to_vec1::<f64>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn tiny(pg: usize) -> GanConfig {
        GanConfig {
            patch_grid: pg,
            gen_base: 4,
            gen_max: 8,
            disc_base: 4,
            disc_max: 8,
            ..GanConfig::default()
        }
    }

    #[test]
    fn half_probability_losses() {
        let z = Tensor::zeros((2, 3, 3), DType::F64, &Device::Cpu).unwrap();
        let d = scalar(&d_loss(&z, &z).unwrap()).unwrap();
        let g = scalar(&g_adv_loss(&z).unwrap()).unwrap();
        assert!((d - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((g - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lgan_composition() {
        let z = Tensor::zeros((1, 2, 2), DType::F64, &Device::Cpu).unwrap();
        let a = Tensor::new(&[[[[0.2f64, 0.4], [0.6, 0.8]]]], &Device::Cpu).unwrap();
        let b = Tensor::new(&[[[[0.0f64, 0.4], [1.0, 0.8]]]], &Device::Cpu).unwrap();
        let l1 = scalar(&l1_loss(&a, &b).unwrap()).unwrap();
        assert!((l1 - 0.15).abs() < 1e-12);
        assert_eq!(scalar(&l1_loss(&a, &a).unwrap()).unwrap(), 0.0);
        let total = scalar(&lgan_loss(&z, &a, &b, 10.0).unwrap()).unwrap();
        assert!((total - (2f64.ln() + 10.0 * l1)).abs() < 1e-12);
    }

    #[test]
    fn discriminator_grid_and_depth() {
        let mut s = ParamStore::new(DType::F32, 0);
        let d = Discriminator::new(&mut s, &tiny(14), 32).unwrap();
        assert_eq!(d.n_layers(), 3);
        let x = Tensor::ones((2, 1, 32, 32), DType::F32, &Device::Cpu).unwrap();
        let y = d.scores(&x, &x.zeros_like().unwrap()).unwrap();
        assert_eq!(y.dims(), [2, 14, 14]);
        let v = y.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert!(v.iter().all(|p| *p > 0.0 && *p < 1.0));
        let mut s = ParamStore::new(DType::F32, 0);
        assert_eq!(Discriminator::new(&mut s, &tiny(14), 128).unwrap().n_layers(), 4);
        let mut s = ParamStore::new(DType::F32, 0);
        let toy = Discriminator::new(&mut s, &tiny(2), 4).unwrap();
        let x = Tensor::ones((1, 1, 4, 4), DType::F32, &Device::Cpu).unwrap();
        assert_eq!(toy.logits(&x, &x).unwrap().dims(), [1, 2, 2]);
    }

    #[test]
    fn generator_shape_range_and_determinism() {
        let mut s = ParamStore::new(DType::F32, 3);
        let g = Generator::new(&mut s, &tiny(2), 16, 5).unwrap();
        let f = Tensor::ones((2, 5), DType::F32, &Device::Cpu).unwrap();
        let x = Tensor::ones((2, 1, 16, 16), DType::F32, &Device::Cpu).unwrap();
        let a = g.forward(&f, &x, None).unwrap();
        let b = g.forward(&f, &x, None).unwrap();
        assert_eq!(a.dims(), [2, 1, 16, 16]);
        let (va, vb) = (
            a.flatten_all().unwrap().to_vec1::<f32>().unwrap(),
            b.flatten_all().unwrap().to_vec1::<f32>().unwrap(),
        );
        assert_eq!(va, vb);
        assert!(va.iter().all(|p| (0.0..=1.0).contains(p)));
        let bad = Tensor::ones((2, 4), DType::F32, &Device::Cpu).unwrap();
        assert!(g.forward(&bad, &x, None).is_err());
    }

    #[test]
    fn mask_selection() {
        let w = [0.1, 0.9, 0.5, 0.9];
        assert_eq!(feature_mask(&w, None, 2, MaskMode::Top).unwrap(), [0.0, 1.0, 0.0, 1.0]);
        assert_eq!(feature_mask(&w, None, 1, MaskMode::Bottom).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let o = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(feature_mask(&w, Some(&o), 1, MaskMode::Cross).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(feature_mask(&w, None, 4, MaskMode::Top).unwrap(), [1.0; 4]);
        assert_eq!(feature_mask(&w, None, 0, MaskMode::Top).unwrap(), [0.0; 4]);
        assert!(feature_mask(&w, None, 5, MaskMode::Top).is_err());
        assert!(feature_mask(&w, None, 1, MaskMode::Cross).is_err());
    }

    #[test]
    fn convergence_rule() {
        let mut c = Convergence::new(0.01, 3);
        assert!(!c.update(1.0));
        assert!(!c.update(0.5));
        for _ in 0..2 {
            assert!(!c.update(c.smoothed().unwrap()));
        }
        assert!(c.update(c.smoothed().unwrap()));
    }
}
