//! Multi-tag affinity scoring on top of predicted tag probabilities, its
//! training loss and triplet sampling. This is the reference (f64) form of
//! the head; training happens in the model crate.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Split};
use crate::tags::{TagLabelVector, TagVocabulary};

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_GAMMA: f64 = 100.0;
pub const TRIPLET_RETRIES: usize = 100;

/// Binary indicator of the query tags over the vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryVector {
    pub bits: Vec<u8>,
    pub tags: Vec<String>,
}

impl QueryVector {
    pub fn from_indices(vocabulary: &TagVocabulary, indices: &[usize]) -> Self {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        QueryVector {
            bits: TagLabelVector::from_indices(vocabulary.len(), &idx).bits,
            tags: idx.iter().map(|&i| vocabulary.tags()[i].clone()).collect(),
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

pub fn encode_query<S: AsRef<str>>(tags: &[S], vocabulary: &TagVocabulary) -> Result<QueryVector> {
    if tags.is_empty() {
        return Err(Error::Malformed {
            what: "query",
            message: "no tags".into(),
        });
    }
    let idx = vocabulary.encode(tags)?;
    Ok(QueryVector::from_indices(vocabulary, &idx))
}

/// `x -> (x + eps)^alpha`
pub fn power_activation(x: f64, alpha: f64, eps: f64) -> f64 {
    (x + eps).powf(alpha)
}

/// `log(1 + exp(gamma (s_neg - s_pos)))`, stable for large arguments.
pub fn ranking_loss(s_pos: f64, s_neg: f64, gamma: f64) -> f64 {
    softplus(gamma * (s_neg - s_pos))
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub min_query_tags: usize,
    pub max_query_tags: usize,
    /// Standard deviation of the second-layer weights around 1.
    pub layer2_std: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
            gamma: DEFAULT_GAMMA,
            min_query_tags: 2,
            max_query_tags: 5,
            layer2_std: 0.02,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::Malformed {
                what: "retrieval config",
                message: m.to_string(),
            })
        };
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.gamma > 0.0) {
            return bad("gamma must be positive");
        }
        if self.min_query_tags < 1 || self.min_query_tags > self.max_query_tags {
            return bad("query size range is empty");
        }
        Ok(())
    }
}

/// Two-layer scorer: mask, power activation, N->N with ReLU, N->1, sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityHead {
    pub n: usize,
    /// Row-major `n x n`, `w1[out * n + in]`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub alpha: f64,
    pub epsilon: f64,
}

impl AffinityHead {
    /// Identity first layer, second layer drawn from N(1, std), zero biases.
    pub fn init(n: usize, cfg: &RetrievalConfig, rng: &mut impl Rng) -> Self {
        let mut w1 = vec![0.0; n * n];
        for i in 0..n {
            w1[i * n + i] = 1.0;
        }
        let normal = Normal::new(1.0, cfg.layer2_std).expect("finite std");
        AffinityHead {
            n,
            w1,
            b1: vec![0.0; n],
            w2: (0..n).map(|_| normal.sample(rng)).collect(),
            b2: 0.0,
            alpha: cfg.alpha,
            epsilon: cfg.epsilon,
        }
    }

    fn check(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n {
            return Err(Error::Malformed {
                what: "affinity input",
                message: format!("{what} has length {len}, head expects {}", self.n),
            });
        }
        Ok(())
    }

    /// Masked probabilities: exactly zero where the query bit is zero.
    pub fn masked(&self, probs: &[f64], query: &QueryVector) -> Result<Vec<f64>> {
        self.check(probs.len(), "probability vector")?;
        self.check(query.len(), "query vector")?;
        Ok(probs
            .iter()
            .zip(&query.bits)
            .map(|(&p, &b)| if b == 1 { p } else { 0.0 })
            .collect())
    }

    /// Pre-sigmoid output from an already masked vector.
    pub fn logit_masked(&self, masked: &[f64]) -> f64 {
        let x: Vec<f64> = masked
            .iter()
            .map(|&m| power_activation(m, self.alpha, self.epsilon))
            .collect();
        let mut out = self.b2;
        for o in 0..self.n {
            let row = &self.w1[o * self.n..(o + 1) * self.n];
            let h = row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + self.b1[o];
            out += self.w2[o] * h.max(0.0);
        }
        out
    }

    pub fn score(&self, probs: &[f64], query: &QueryVector) -> Result<f64> {
        Ok(sigmoid(self.logit_masked(&self.masked(probs, query)?)))
    }

    /// Mean score over several per-glyph probability vectors.
    pub fn score_glyphs(&self, glyph_probs: &[Vec<f64>], query: &QueryVector) -> Result<f64> {
        if glyph_probs.is_empty() {
            return Err(Error::Malformed {
                what: "affinity input",
                message: "no glyph probabilities".into(),
            });
        }
        let mut sum = 0.0;
        for p in glyph_probs {
            sum += self.score(p, query)?;
        }
        Ok(sum / glyph_probs.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub query: Vec<usize>,
    pub positive: String,
    pub negative: String,
}

/// Seeded stream of (query, positive, negative) triplets over one split.
pub struct TripletSampler {
    rng: ChaCha8Rng,
    fonts: Vec<(String, TagLabelVector)>,
    /// Indices into `fonts` with enough tags to form a query.
    anchors: Vec<usize>,
    min_tags: usize,
    max_tags: usize,
}

impl TripletSampler {
    pub fn new(manifest: &DatasetManifest, split: Split, cfg: &RetrievalConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut ids: Vec<&String> = manifest.split(split).iter().collect();
        ids.sort();
        let fonts = ids
            .into_iter()
            .map(|id| Ok((id.clone(), manifest.labels(id)?)))
            .collect::<Result<Vec<_>>>()?;
        let anchors: Vec<usize> = (0..fonts.len())
            .filter(|&i| fonts[i].1.count() >= cfg.min_query_tags)
            .collect();
        if anchors.is_empty() {
            return Err(Error::Malformed {
                what: "triplet source",
                message: format!(
                    "no {split} font has at least {} tags",
                    cfg.min_query_tags
                ),
            });
        }
        Ok(TripletSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            fonts,
            anchors,
            min_tags: cfg.min_query_tags,
            max_tags: cfg.max_query_tags,
        })
    }

    pub fn next_triplet(&mut self) -> Result<Triplet> {
        for _ in 0..TRIPLET_RETRIES {
            let a = self.anchors[self.rng.random_range(0..self.anchors.len())];
            let labels = self.fonts[a].1.indices();
            let size = self
                .rng
                .random_range(self.min_tags..=self.max_tags)
                .min(labels.len());
            let mut query: Vec<usize> = sample(&mut self.rng, labels.len(), size)
                .into_iter()
                .map(|i| labels[i])
                .collect();
            query.sort_unstable();
            let negatives: Vec<usize> = (0..self.fonts.len())
                .filter(|&i| !query.iter().all(|&t| self.fonts[i].1.contains(t)))
                .collect();
            if negatives.is_empty() {
                continue;
            }
            let n = negatives[self.rng.random_range(0..negatives.len())];
            return Ok(Triplet {
                query,
                positive: self.fonts[a].0.clone(),
                negative: self.fonts[n].0.clone(),
            });
        }
        Err(Error::Malformed {
            what: "triplet source",
            message: format!("no negative found after {TRIPLET_RETRIES} queries"),
        })
    }

    pub fn batch(&mut self, n: usize) -> Result<Vec<Triplet>> {
        (0..n).map(|_| self.next_triplet()).collect()
    }
}

/// `n` triplets from the training split.
pub fn sample_triplets(manifest: &DatasetManifest, n: usize, seed: u64) -> Result<Vec<Triplet>> {
    TripletSampler::new(manifest, Split::Train, &RetrievalConfig::default(), seed)?.batch(n)
}
