//! Ranking metrics and query-set evaluation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::amt::AmtSummary;
use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Split};
use crate::queries::{positives_for, QueryKind, QuerySet};

/// Scores a (query, font) pair. `query` holds vocabulary indices.
pub trait FontScorer {
    fn score(&self, query: &[usize], font_id: &str) -> std::result::Result<f64, String>;
}

impl<F> FontScorer for F
where
    F: Fn(&[usize], &str) -> std::result::Result<f64, String>,
{
    fn score(&self, query: &[usize], font_id: &str) -> std::result::Result<f64, String> {
        self(query, font_id)
    }
}

/// Candidates in descending score order, ties by ascending font id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query: Vec<String>,
    pub ranked: Vec<(String, f64)>,
    pub positives: BTreeSet<String>,
}

/// Descending score, then ascending font id.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

impl RankingResult {
    pub fn new(
        query: Vec<String>,
        mut scores: Vec<(String, f64)>,
        positives: BTreeSet<String>,
    ) -> Result<Self> {
        if let Some((id, _)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::NonFiniteScore(id.clone()));
        }
        scores.sort_by(rank_order);
        Ok(RankingResult {
            query,
            ranked: scores,
            positives,
        })
    }

    pub fn relevance(&self) -> Vec<bool> {
        self.ranked
            .iter()
            .map(|(id, _)| self.positives.contains(id))
            .collect()
    }

    /// 1-based ranks of the positives present in the ranking.
    pub fn positive_ranks(&self) -> Vec<usize> {
        self.relevance()
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// `(1/H) Σ_h h / r_h`; `None` without positives.
pub fn average_precision(ranking: &RankingResult) -> Option<f64> {
    let ranks = ranking.positive_ranks();
    if ranks.is_empty() {
        return None;
    }
    let sum: f64 = ranks
        .iter()
        .enumerate()
        .map(|(h, &r)| (h + 1) as f64 / r as f64)
        .sum();
    Some(sum / ranks.len() as f64)
}

/// Binary-relevance DCG over an explicit relevance list.
pub fn dcg(relevance: &[bool]) -> f64 {
    relevance
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum()
}

/// DCG / IDCG; `None` without positives.
pub fn ndcg(ranking: &RankingResult) -> Option<f64> {
    let rel = ranking.relevance();
    let h = rel.iter().filter(|&&r| r).count();
    if h == 0 {
        return None;
    }
    let ideal: f64 = (0..h).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    Some(dcg(&rel) / ideal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub tags: Vec<String>,
    pub n_positives: usize,
    pub ap: f64,
    pub ndcg: f64,
}

/// Metrics of one query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub kind: QueryKind,
    pub split: Split,
    pub queries: Vec<QueryMetrics>,
    pub map: f64,
    pub mean_ndcg: f64,
    /// Queries without positives, excluded from the means.
    pub skipped_queries: usize,
}

/// Everything `evaluate` produces for one scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variant: String,
    pub sets: Vec<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amt: Option<AmtSummary>,
}

impl EvaluationReport {
    pub fn set(&self, kind: QueryKind) -> Option<&MetricReport> {
        self.sets.iter().find(|s| s.kind == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("variant: {}\n", self.variant);
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>8} {:>8} {:>8}",
            "query set", "split", "queries", "mAP", "nDCG"
        );
        for s in &self.sets {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>8} {:>8.2} {:>8.2}",
                s.kind.name(),
                s.split.name(),
                s.queries.len(),
                100.0 * s.map,
                100.0 * s.mean_ndcg
            );
            if s.skipped_queries > 0 {
                let _ = writeln!(out, "  ({} queries without positives skipped)", s.skipped_queries);
            }
        }
        if let Some(a) = &self.amt {
            let _ = writeln!(
                out,
                "groups: {}  accuracy: {:.2}  average rank: {:.3}",
                a.n_groups,
                100.0 * a.accuracy,
                a.average_rank
            );
        }
        out
    }

    /// One row per query: set, tags (joined with `+`), positives, AP, nDCG.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("set,tags,positives,ap,ndcg\n");
        for s in &self.sets {
            for q in &s.queries {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6}",
                    s.kind.name(),
                    q.tags.join("+"),
                    q.n_positives,
                    q.ap,
                    q.ndcg
                );
            }
        }
        out
    }
}

/// Ranks every font of the query set's split for every query.
pub fn evaluate_query_set(
    query_set: &QuerySet,
    scorer: &impl FontScorer,
    manifest: &DatasetManifest,
) -> Result<MetricReport> {
    let mut candidates: Vec<&String> = manifest.split(query_set.split).iter().collect();
    candidates.sort();
    let mut queries = Vec::with_capacity(query_set.queries.len());
    let mut skipped = query_set.dropped_empty;
    for q in &query_set.queries {
        let idx = manifest.vocabulary.encode(&q.tags)?;
        let positives: BTreeSet<String> =
            positives_for(manifest, query_set.split, &idx)?.into_iter().collect();
        if positives.is_empty() {
            skipped += 1;
            continue;
        }
        let mut scores = Vec::with_capacity(candidates.len());
        for &id in &candidates {
            let s = scorer.score(&idx, id).map_err(|message| Error::Scorer {
                query: q.tags.join(", "),
                font_id: id.clone(),
                message,
            })?;
            scores.push((id.clone(), s));
        }
        let ranking = RankingResult::new(q.tags.clone(), scores, positives)?;
        queries.push(QueryMetrics {
            tags: q.tags.clone(),
            n_positives: ranking.positives.len(),
            ap: average_precision(&ranking).expect("positives present"),
            ndcg: ndcg(&ranking).expect("positives present"),
        });
    }
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if queries.is_empty() {
            0.0
        } else {
            queries.iter().map(f).sum::<f64>() / queries.len() as f64
        }
    };
    Ok(MetricReport {
        kind: query_set.kind,
        split: query_set.split,
        map: mean(|q| q.ap),
        mean_ndcg: mean(|q| q.ndcg),
        queries,
        skipped_queries: skipped,
    })
}

/// Product of the query tags' probabilities.
pub fn product_baseline_scorer(probs: &[f64], query: &[usize]) -> f64 {
    query.iter().map(|&t| probs[t]).product()
}

/// Font-level tag probabilities scored with the product rule.
#[derive(Debug, Clone, Default)]
pub struct ProductScorer {
    pub probs: HashMap<String, Vec<f64>>,
}

impl ProductScorer {
    pub fn new(probs: HashMap<String, Vec<f64>>) -> Self {
        ProductScorer { probs }
    }
}

impl FontScorer for ProductScorer {
    fn score(&self, query: &[usize], font_id: &str) -> std::result::Result<f64, String> {
        let p = self
            .probs
            .get(font_id)
            .ok_or_else(|| format!("no probabilities for font `{font_id}`"))?;
        if let Some(&t) = query.iter().find(|&&t| t >= p.len()) {
            return Err(format!("tag index {t} outside {} tags", p.len()));
        }
        Ok(product_baseline_scorer(p, query))
    }
}
