//! Query-affinity head trained with the pairwise soft ranking loss on
//! frozen recognition outputs.

use candle_core::{DType, Device, Tensor};
use glyphtag_core::affinity::{AffinityHead, RetrievalConfig, TripletSampler};
use glyphtag_core::{DatasetManifest, Split, GLYPH_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModelError, Result};
use crate::layers::{sigmoid, softplus};
use crate::params::ParamStore;
use crate::recognizer::stage_rng;
use crate::train::{checked, Adam, TrainLog};

pub const RETRIEVAL: &str = "retrieval";

/// Tensor version of [`AffinityHead`] with trainable weights.
pub struct RetrievalHead {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub alpha: f64,
    pub epsilon: f64,
}

impl RetrievalHead {
    pub fn new(store: &mut ParamStore, n: usize, cfg: &RetrievalConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let init = AffinityHead::init(n, cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(RetrievalHead {
            w1: store.with_values(&format!("{RETRIEVAL}.w1"), &[n, n], init.w1)?,
            b1: store.with_values(&format!("{RETRIEVAL}.b1"), &[n], init.b1)?,
            w2: store.with_values(&format!("{RETRIEVAL}.w2"), &[1, n], init.w2)?,
            b2: store.with_values(&format!("{RETRIEVAL}.b2"), &[1], vec![init.b2])?,
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
        })
    }

    pub fn n(&self) -> usize {
        self.b1.dims()[0]
    }

    /// Pre-sigmoid scores `(B,)` for probabilities and 0/1 query masks, both
    /// `(B, N)`.
    pub fn logits(&self, probs: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let n = self.n();
        if probs.dims() != mask.dims() || probs.dims().last() != Some(&n) {
            return Err(ModelError::Shape(format!(
                "probabilities {:?} and query {:?} for a head of size {n}",
                probs.dims(),
                mask.dims()
            )));
        }
        let x = (probs * mask)?.affine(1.0, self.epsilon)?.powf(self.alpha)?;
        let h = x.matmul(&self.w1.t()?)?.broadcast_add(&self.b1)?.relu()?;
        Ok(h.matmul(&self.w2.t()?)?.broadcast_add(&self.b2)?.squeeze(1)?)
    }

    pub fn scores(&self, probs: &Tensor, mask: &Tensor) -> Result<Tensor> {
        sigmoid(&self.logits(probs, mask)?)
    }

    /// Plain-number copy for scoring outside candle.
    pub fn to_core(&self) -> Result<AffinityHead> {
        let v = |t: &Tensor| -> Result<Vec<f64>> { Ok(t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?) };
        Ok(AffinityHead {
            n: self.n(),
            w1: v(&self.w1)?,
            b1: v(&self.b1)?,
            w2: v(&self.w2)?,
            b2: v(&self.b2)?[0],
            alpha: self.alpha,
            epsilon: self.epsilon,
        })
    }
}

/// Mean `log(1 + exp(gamma (s_neg - s_pos)))` over a batch.
pub fn ranking_loss(s_pos: &Tensor, s_neg: &Tensor, gamma: f64) -> Result<Tensor> {
    Ok(softplus(&(s_neg - s_pos)?.affine(gamma, 0.0)?)?.mean_all()?)
}

/// Frozen per-glyph tag probabilities of one split, `probs[font][glyph][tag]`.
pub struct GlyphProbs {
    pub fonts: Vec<String>,
    pub probs: Vec<Vec<Vec<f64>>>,
}

impl GlyphProbs {
    pub fn index_of(&self, font_id: &str) -> Option<usize> {
        self.fonts.iter().position(|f| f == font_id)
    }
}

fn query_mask(n: usize, query: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; n];
    for &t in query {
        m[t] = 1.0;
    }
    m
}

/// Stage 4: only the head trains. Each step draws `stage4_batch` triplets
/// and one random glyph per positive and negative font.
#[allow(clippy::too_many_arguments)]
pub fn train_stage4(
    store: &mut ParamStore,
    manifest: &DatasetManifest,
    glyph_probs: &GlyphProbs,
    cfg: &RetrievalConfig,
    lr: f64,
    steps: usize,
    batch: usize,
    seed: u64,
) -> Result<(RetrievalHead, TrainLog)> {
    let n = manifest.vocabulary.len();
    let head = RetrievalHead::new(store, n, cfg, seed)?;
    let mut opt = Adam::new(store.vars_with_prefix(&format!("{RETRIEVAL}.")), lr)?;
    let mut sampler = TripletSampler::new(manifest, Split::Train, cfg, seed)?;
    let mut rng = stage_rng(seed, 4);
    let dtype = store.dtype();
    let mut log = TrainLog::default();
    let mut window = Vec::new();
    for step in 0..steps {
        let triplets = sampler.batch(batch)?;
        let mut pos = Vec::with_capacity(batch * n);
        let mut neg = Vec::with_capacity(batch * n);
        let mut mask = Vec::with_capacity(batch * n);
        for t in &triplets {
            for (font, out) in [(&t.positive, &mut pos), (&t.negative, &mut neg)] {
                let fi = glyph_probs
                    .index_of(font)
                    .ok_or_else(|| ModelError::EmptyDataset(format!("no probabilities for font `{font}`")))?;
                out.extend_from_slice(&glyph_probs.probs[fi][rng.random_range(0..GLYPH_COUNT)]);
            }
            mask.extend(query_mask(n, &t.query));
        }
        let t = |v: Vec<f64>| -> Result<Tensor> { Ok(Tensor::from_vec(v, (batch, n), &Device::Cpu)?.to_dtype(dtype)?) };
        let mask = t(mask)?;
        let s_pos = head.scores(&t(pos)?, &mask)?;
        let s_neg = head.scores(&t(neg)?, &mask)?;
        let loss = ranking_loss(&s_pos, &s_neg, cfg.gamma)?;
        window.push(checked("train-stage4", step, "ranking loss", &loss)?);
        opt.step(&loss.backward()?)?;
        if window.len() == 100 || step + 1 == steps {
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            log.push("stage4", step + 1, "train", mean, None);
            window.clear();
        }
    }
    Ok((head, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use glyphtag_core::affinity::QueryVector;

    #[test]
    fn matches_plain_head() {
        let mut s = ParamStore::new(DType::F64, 0);
        let cfg = RetrievalConfig::default();
        let head = RetrievalHead::new(&mut s, 4, &cfg, 11).unwrap();
        let core = head.to_core().unwrap();
        let p = [0.9, 0.2, 0.6, 0.05];
        let q = QueryVector {
            bits: vec![1, 0, 1, 1],
            tags: vec![],
        };
        let pt = Tensor::new(&[p], &Device::Cpu).unwrap();
        let mt = Tensor::new(&[[1.0f64, 0.0, 1.0, 1.0]], &Device::Cpu).unwrap();
        let got = head.scores(&pt, &mt).unwrap().to_vec1::<f64>().unwrap()[0];
        assert!((got - core.score(&p, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn ranking_loss_batch_mean() {
        let a = Tensor::new(&[0.5f64, 0.6], &Device::Cpu).unwrap();
        let b = Tensor::new(&[0.5f64, 0.5], &Device::Cpu).unwrap();
        let l = crate::train::scalar(&ranking_loss(&a, &b, 100.0).unwrap()).unwrap();
        let want = (2f64.ln() + (-10f64).exp().ln_1p()) / 2.0;
        assert!((l - want).abs() < 1e-12);
    }
}
