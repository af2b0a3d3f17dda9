//! Parametric stand-in for a crawled font collection: sample style
//! parameters, derive tags from the rule table in [`crate::style`], emit them
//! with realistic surface noise, split 0.8/0.1/0.1 and normalize.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, FontRecord, Splits};
use crate::style::{derive_tags, raw_variants, FontParams};
use crate::tags::{normalize_tags_counted, DEFAULT_MIN_COUNT};

pub const MIN_FONTS: usize = 10;

/// Non-visual tags a crawl picks up; each is rare enough to be cut by the
/// frequency filter on any realistic corpus size.
const NOISE_TAGS: [&str; 32] = [
    "sale", "new release", "best seller", "web font", "opentype", "family",
    "multilingual", "cyrillic", "greek", "free", "commercial", "personal use",
    "logo", "poster", "magazine", "headline", "packaging", "brand", "wedding",
    "invitation", "menu", "signage", "book", "editorial", "label", "sticker",
    "game", "movie", "music", "sport", "food", "travel",
];

/// Sampling distribution of the synthesizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_fonts: usize,
    pub seed: u64,
    pub min_count: usize,
    pub stroke_range: (f64, f64),
    /// Outline fonts draw from this heavier range so the ring stays visible.
    pub outline_stroke_range: (f64, f64),
    pub slant_range: (f64, f64),
    pub width_range: (f64, f64),
    pub italic_prob: f64,
    pub serif_prob: f64,
    pub rounded_prob: f64,
    pub outline_prob: f64,
    pub shadow_prob: f64,
    /// Probability of a second surface spelling for the same tag.
    pub duplicate_prob: f64,
    pub noise_prob: f64,
}

impl SynthConfig {
    pub fn standard(n_fonts: usize, seed: u64) -> Self {
        SynthConfig {
            n_fonts,
            seed,
            min_count: DEFAULT_MIN_COUNT,
            stroke_range: (0.04, 0.16),
            outline_stroke_range: (0.10, 0.16),
            slant_range: (6.0, 18.0),
            width_range: (0.75, 1.30),
            italic_prob: 0.35,
            serif_prob: 0.40,
            rounded_prob: 0.30,
            outline_prob: 0.12,
            shadow_prob: 0.12,
            duplicate_prob: 0.15,
            noise_prob: 0.08,
        }
    }

    /// Strongly skewed flag frequencies: `serif` is roughly ten times more
    /// common than `shadow`.
    pub fn imbalanced(n_fonts: usize, seed: u64) -> Self {
        SynthConfig {
            serif_prob: 0.55,
            shadow_prob: 0.055,
            outline_prob: 0.06,
            rounded_prob: 0.35,
            italic_prob: 0.45,
            ..Self::standard(n_fonts, seed)
        }
    }

    pub fn with_min_count(mut self, min_count: usize) -> Self {
        self.min_count = min_count;
        self
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub fn sample_params(cfg: &SynthConfig, rng: &mut impl Rng) -> FontParams {
    let outline = rng.random_bool(cfg.outline_prob);
    let (lo, hi) = if outline {
        cfg.outline_stroke_range
    } else {
        cfg.stroke_range
    };
    let stroke_width = round4(rng.random_range(lo..hi));
    let slant_degrees = if rng.random_bool(cfg.italic_prob) {
        round4(rng.random_range(cfg.slant_range.0..cfg.slant_range.1))
    } else {
        0.0
    };
    let serif = rng.random_bool(cfg.serif_prob);
    let rounded = rng.random_bool(cfg.rounded_prob);
    let shadow = rng.random_bool(cfg.shadow_prob);
    let width_ratio = round4(rng.random_range(cfg.width_range.0..cfg.width_range.1));
    FontParams {
        stroke_width,
        slant_degrees,
        serif,
        rounded,
        outline,
        shadow,
        width_ratio,
    }
}

/// Raw crawl-style tag strings for a font with the given parameters.
pub fn raw_tags_for(params: &FontParams, cfg: &SynthConfig, rng: &mut impl Rng) -> Vec<String> {
    let mut out = Vec::new();
    for tag in derive_tags(params) {
        let variants = raw_variants(tag);
        out.push(variants[rng.random_range(0..variants.len())].to_string());
        if rng.random_bool(cfg.duplicate_prob) {
            out.push(variants[rng.random_range(0..variants.len())].to_string());
        }
    }
    if rng.random_bool(cfg.noise_prob) {
        out.push(NOISE_TAGS[rng.random_range(0..NOISE_TAGS.len())].to_string());
    }
    out.shuffle(rng);
    out
}

/// Split sizes for `n` fonts in proportion 0.8/0.1/0.1.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (0.8 * n as f64).round() as usize;
    let val = (0.1 * n as f64).round() as usize;
    (train, val, n - train - val)
}

pub fn synthesize_corpus(n_fonts: usize, seed: u64) -> Result<DatasetManifest> {
    synthesize(&SynthConfig::standard(n_fonts, seed))
}

pub fn synthesize(cfg: &SynthConfig) -> Result<DatasetManifest> {
    if cfg.n_fonts < MIN_FONTS {
        return Err(Error::CorpusTooSmall {
            n_fonts: cfg.n_fonts,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.n_fonts.to_string().len().max(4);
    let mut fonts: Vec<(String, FontParams, Vec<String>)> = (0..cfg.n_fonts)
        .map(|i| {
            let params = sample_params(cfg, &mut rng);
            let raw = raw_tags_for(&params, cfg, &mut rng);
            (format!("font-{i:0width$}"), params, raw)
        })
        .collect();

    let mut order: Vec<usize> = (0..fonts.len()).collect();
    order.shuffle(&mut rng);
    let (n_train, n_val, _) = split_sizes(fonts.len());
    let mut in_train = vec![false; fonts.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }

    let raw_lists: Vec<Vec<String>> = fonts.iter().map(|f| f.2.clone()).collect();
    let normalized = normalize_tags_counted(&raw_lists, cfg.min_count, &in_train)?;
    let dropped_fonts: Vec<String> = normalized
        .dropped
        .iter()
        .map(|&i| fonts[i].0.clone())
        .collect();

    let assign = |range: &[usize]| -> Vec<String> {
        let mut ids: Vec<String> = range
            .iter()
            .filter(|&&i| normalized.labels[i].is_some())
            .map(|&i| fonts[i].0.clone())
            .collect();
        ids.sort();
        ids
    };
    let splits = Splits {
        train: assign(&order[..n_train]),
        val: assign(&order[n_train..n_train + n_val]),
        test: assign(&order[n_train + n_val..]),
    };
    for (name, ids) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
    ] {
        if ids.is_empty() {
            return Err(Error::EmptySplit(name));
        }
    }

    let records = fonts
        .drain(..)
        .zip(normalized.tags)
        .zip(&normalized.labels)
        .filter(|(_, label)| label.is_some())
        .map(|(((font_id, family_params, raw_tags), tags), _)| FontRecord {
            font_id,
            family_params,
            raw_tags,
            tags,
        })
        .collect();
    DatasetManifest::new(cfg.seed, records, splits, normalized.vocabulary, dropped_fonts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Split;
    use crate::style::{tag_applies, BOLD_THRESHOLD, RULE_TAGS};

    #[test]
    fn hundred_fonts_split_80_10_10() {
        let m = synthesize_corpus(100, 7).unwrap();
        assert!(m.dropped_fonts.is_empty());
        assert_eq!(m.splits.train.len(), 80);
        assert_eq!(m.splits.val.len(), 10);
        assert_eq!(m.splits.test.len(), 10);
    }

    #[test]
    fn same_seed_same_manifest() {
        assert_eq!(synthesize_corpus(60, 3).unwrap(), synthesize_corpus(60, 3).unwrap());
        assert_ne!(synthesize_corpus(60, 3).unwrap(), synthesize_corpus(60, 4).unwrap());
    }

    #[test]
    fn too_small_corpus_is_rejected() {
        assert!(matches!(
            synthesize_corpus(9, 1),
            Err(Error::CorpusTooSmall { n_fonts: 9 })
        ));
    }

    #[test]
    fn bold_rule_holds_for_every_font() {
        let m = synthesize(&SynthConfig::standard(200, 11)).unwrap();
        assert!(m.vocabulary.index_of("bold").is_some());
        for f in &m.fonts {
            let bold = f.tags.iter().any(|t| t == "bold");
            assert_eq!(bold, f.family_params.stroke_width > BOLD_THRESHOLD, "{}", f.font_id);
        }
    }

    #[test]
    fn normalized_tags_equal_rule_tags_within_vocabulary() {
        let m = synthesize(&SynthConfig::standard(150, 5)).unwrap();
        for f in &m.fonts {
            let expected: Vec<&str> = RULE_TAGS
                .iter()
                .copied()
                .filter(|t| tag_applies(t, &f.family_params))
                .filter(|t| m.vocabulary.index_of(t).is_some())
                .collect();
            let mut expected: Vec<String> = expected.into_iter().map(String::from).collect();
            expected.sort();
            // Noise tags may survive the frequency cut on large corpora only.
            let got: Vec<String> = f
                .tags
                .iter()
                .filter(|t| RULE_TAGS.contains(&t.as_str()))
                .cloned()
                .collect();
            assert_eq!(got, expected, "{}", f.font_id);
        }
    }

    #[test]
    fn min_count_is_counted_on_train_split() {
        let m = synthesize(&SynthConfig::standard(120, 9)).unwrap();
        for (i, tag) in m.vocabulary.tags().iter().enumerate() {
            let n = m
                .split(Split::Train)
                .iter()
                .filter(|id| m.font(id).unwrap().tags.contains(tag))
                .count();
            assert_eq!(n, m.vocabulary.frequency(i), "{tag}");
            assert!(n >= 10);
        }
    }

    #[test]
    fn imbalanced_preset_skews_serif_over_shadow() {
        let cfg = SynthConfig::imbalanced(600, 2).with_min_count(1);
        let m = synthesize(&cfg).unwrap();
        let freq = |t: &str| m.vocabulary.frequency(m.vocabulary.index_of(t).unwrap()) as f64;
        let ratio = freq("serif") / freq("shadow");
        assert!(ratio > 6.0 && ratio < 16.0, "ratio {ratio}");
    }

    #[test]
    fn split_sizes_round() {
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(25), (20, 3, 2));
    }
}
