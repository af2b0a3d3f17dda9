//! Three-font forced-choice groups and their evaluation. The ground truth of a
//! group is the candidate whose generating parameters express the tag most
//! strongly.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Split};
use crate::metrics::FontScorer;
use crate::style::{tag_strength, FontParams};
use crate::tags::TagVocabulary;

pub const GROUP_SIZE: usize = 3;
/// Minimum strength gap between the winner and the runner-up.
pub const MIN_STRENGTH_GAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationGroup {
    pub tag: String,
    pub candidates: Vec<String>,
    pub ground_truth: String,
}

impl EvaluationGroup {
    /// Validated constructor: three distinct candidates, all labeled with
    /// `tag`, ground truth among them.
    pub fn new(
        manifest: &DatasetManifest,
        tag: &str,
        candidates: Vec<String>,
        ground_truth: &str,
    ) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidGroup {
            tag: tag.to_string(),
            reason,
        };
        if candidates.len() != GROUP_SIZE {
            return Err(invalid(format!("{} candidates", candidates.len())));
        }
        if candidates.iter().collect::<BTreeSet<_>>().len() != GROUP_SIZE {
            return Err(invalid("duplicate candidates".into()));
        }
        if !candidates.iter().any(|c| c == ground_truth) {
            return Err(invalid(format!("ground truth `{ground_truth}` is not a candidate")));
        }
        for c in &candidates {
            if !manifest.font(c)?.tags.iter().any(|t| t == tag) {
                return Err(invalid(format!("candidate `{c}` is not labeled with the tag")));
            }
        }
        Ok(EvaluationGroup {
            tag: tag.to_string(),
            candidates,
            ground_truth: ground_truth.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmtGroups {
    pub groups: Vec<EvaluationGroup>,
    /// Tags without enough labeled fonts, or without an orderable strength.
    pub skipped_tags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmtSummary {
    pub n_groups: usize,
    pub accuracy: f64,
    pub average_rank: f64,
}

/// Scores a font for a single tag by its generating parameters.
pub struct ParameterOracle<'a> {
    pub manifest: &'a DatasetManifest,
}

impl FontScorer for ParameterOracle<'_> {
    fn score(&self, query: &[usize], font_id: &str) -> std::result::Result<f64, String> {
        let [t] = query else {
            return Err(format!("oracle scores single tags, got {}", query.len()));
        };
        let tag = self
            .manifest
            .vocabulary
            .tag(*t)
            .ok_or_else(|| format!("tag index {t} out of range"))?;
        let params = self.manifest.params(font_id).map_err(|e| e.to_string())?;
        tag_strength(tag, &params).ok_or_else(|| format!("tag `{tag}` has no strength"))
    }
}

fn winner(strengths: &[(String, f64)]) -> Option<&str> {
    let mut sorted: Vec<&(String, f64)> = strengths.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    (sorted[0].1 - sorted[1].1 > MIN_STRENGTH_GAP).then_some(sorted[0].0.as_str())
}

pub fn build_amt_groups(manifest: &DatasetManifest, n_groups: usize, seed: u64) -> Result<AmtGroups> {
    build_amt_groups_for(manifest, Split::Test, n_groups, seed)
}

pub fn build_amt_groups_for(
    manifest: &DatasetManifest,
    split: Split,
    n_groups: usize,
    seed: u64,
) -> Result<AmtGroups> {
    let mut eligible: Vec<(&str, Vec<&String>)> = Vec::new();
    let mut skipped_tags = Vec::new();
    for tag in manifest.vocabulary.tags() {
        let orderable = tag_strength(tag, &FontParams::standard()).is_some();
        let mut fonts: Vec<&String> = Vec::new();
        for id in manifest.split(split) {
            if manifest.font(id)?.tags.contains(tag) {
                fonts.push(id);
            }
        }
        fonts.sort();
        if orderable && fonts.len() >= GROUP_SIZE {
            eligible.push((tag.as_str(), fonts));
        } else {
            skipped_tags.push(tag.clone());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut groups = Vec::with_capacity(n_groups);
    let max_attempts = 50 * n_groups.max(1);
    let mut attempts = 0;
    while groups.len() < n_groups && !eligible.is_empty() && attempts < max_attempts {
        attempts += 1;
        let (tag, fonts) = &eligible[rng.random_range(0..eligible.len())];
        let mut picked: Vec<String> = sample(&mut rng, fonts.len(), GROUP_SIZE)
            .into_iter()
            .map(|i| fonts[i].clone())
            .collect();
        let mut key = picked.clone();
        key.sort();
        if !seen.insert((tag.to_string(), key)) {
            continue;
        }
        let strengths: Vec<(String, f64)> = picked
            .iter()
            .map(|id| {
                let p = manifest.params(id)?;
                Ok((id.clone(), tag_strength(tag, &p).expect("orderable tag")))
            })
            .collect::<Result<_>>()?;
        let Some(gt) = winner(&strengths).map(str::to_string) else {
            continue;
        };
        picked.sort();
        groups.push(EvaluationGroup::new(manifest, tag, picked, &gt)?);
    }
    Ok(AmtGroups {
        groups,
        skipped_tags,
    })
}

/// Rank of the ground truth within its group (1 = best). Tied candidates
/// share the mean of the ranks they span.
pub fn ground_truth_rank(scores: &[(String, f64)], ground_truth: &str) -> Option<f64> {
    let gt = scores.iter().find(|(id, _)| id == ground_truth)?.1;
    let above = scores.iter().filter(|(_, s)| *s > gt).count();
    let tied = scores.iter().filter(|(_, s)| *s == gt).count();
    Some(above as f64 + (tied as f64 + 1.0) / 2.0)
}

/// Accuracy counts groups where the ground truth scores strictly highest.
pub fn amt_eval(
    groups: &[EvaluationGroup],
    vocabulary: &TagVocabulary,
    scorer: &impl FontScorer,
) -> Result<AmtSummary> {
    let mut correct = 0usize;
    let mut rank_sum = 0.0;
    for g in groups {
        if g.candidates.len() != GROUP_SIZE {
            return Err(Error::InvalidGroup {
                tag: g.tag.clone(),
                reason: format!("{} candidates", g.candidates.len()),
            });
        }
        let t = vocabulary.encode(&[g.tag.as_str()])?;
        let mut scores = Vec::with_capacity(GROUP_SIZE);
        for c in &g.candidates {
            let s = scorer.score(&t, c).map_err(|message| Error::Scorer {
                query: g.tag.clone(),
                font_id: c.clone(),
                message,
            })?;
            if !s.is_finite() {
                return Err(Error::NonFiniteScore(c.clone()));
            }
            scores.push((c.clone(), s));
        }
        let rank = ground_truth_rank(&scores, &g.ground_truth).ok_or_else(|| Error::InvalidGroup {
            tag: g.tag.clone(),
            reason: "ground truth is not a candidate".into(),
        })?;
        if rank == 1.0 {
            correct += 1;
        }
        rank_sum += rank;
    }
    let n = groups.len();
    Ok(AmtSummary {
        n_groups: n,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        average_rank: if n == 0 { 0.0 } else { rank_sum / n as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tied_ranks_average() {
        let s = |v: [f64; 3]| -> Vec<(String, f64)> {
            ["a", "b", "c"].iter().zip(v).map(|(id, x)| (id.to_string(), x)).collect()
        };
        assert_eq!(ground_truth_rank(&s([0.9, 0.5, 0.1]), "a"), Some(1.0));
        assert_eq!(ground_truth_rank(&s([0.9, 0.5, 0.1]), "c"), Some(3.0));
        assert_eq!(ground_truth_rank(&s([0.5, 0.5, 0.1]), "a"), Some(1.5));
        assert_eq!(ground_truth_rank(&s([0.5, 0.5, 0.5]), "b"), Some(2.0));
        assert_eq!(ground_truth_rank(&s([0.5, 0.5, 0.5]), "z"), None);
    }

    #[test]
    fn winner_needs_a_gap() {
        let s = vec![("a".to_string(), 0.9), ("b".into(), 0.5), ("c".into(), 0.45)];
        assert_eq!(winner(&s), Some("a"));
        let s = vec![("a".to_string(), 0.9), ("b".into(), 0.9), ("c".into(), 0.45)];
        assert_eq!(winner(&s), None);
    }
}
