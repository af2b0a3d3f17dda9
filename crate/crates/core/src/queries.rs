//! Evaluation query sets: every single tag, the most frequent training tags,
//! and random multi-tag subsets of each evaluated font's labels.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, Split};

pub const TOP_K: usize = 300;
pub const SUBSETS_PER_FONT: usize = 3;
pub const MIN_QUERY_TAGS: usize = 2;
pub const MAX_QUERY_TAGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    #[serde(rename = "single-full")]
    SingleFull,
    #[serde(rename = "single-top300")]
    SingleTop,
    #[serde(rename = "multi")]
    Multi,
}

impl QueryKind {
    pub const ALL: [QueryKind; 3] = [QueryKind::SingleFull, QueryKind::SingleTop, QueryKind::Multi];

    pub fn name(self) -> &'static str {
        match self {
            QueryKind::SingleFull => "single-full",
            QueryKind::SingleTop => "single-top300",
            QueryKind::Multi => "multi",
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    /// Tags in vocabulary order.
    pub tags: Vec<String>,
    /// Fonts of the evaluated split carrying every query tag, sorted.
    pub positives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    pub kind: QueryKind,
    pub split: Split,
    pub queries: Vec<Query>,
    /// Candidate queries left out because no font of the split matches them.
    #[serde(default)]
    pub dropped_empty: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySets {
    pub single_full: QuerySet,
    pub single_top: QuerySet,
    pub multi: QuerySet,
}

impl QuerySets {
    pub fn iter(&self) -> impl Iterator<Item = &QuerySet> {
        [&self.single_full, &self.single_top, &self.multi].into_iter()
    }
}

#[derive(Serialize, Deserialize)]
struct QueryLine {
    kind: QueryKind,
    split: Split,
    tags: Vec<String>,
    positives: Vec<String>,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for q in &self.queries {
            let line = QueryLine {
                kind: self.kind,
                split: self.split,
                tags: q.tags.clone(),
                positives: q.positives.clone(),
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n").map_err(|e| Error::io("<query writer>", e))?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead, kind: QueryKind, split: Split) -> Result<Self> {
        let mut queries = Vec::new();
        for line in r.lines() {
            let line = line.map_err(|e| Error::io("<query reader>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let q: QueryLine = serde_json::from_str(&line)?;
            if q.kind != kind || q.split != split {
                return Err(Error::Malformed {
                    what: "query set",
                    message: format!("line has kind {} / split {}", q.kind, q.split),
                });
            }
            queries.push(Query {
                tags: q.tags,
                positives: q.positives,
            });
        }
        Ok(QuerySet {
            kind,
            split,
            queries,
            dropped_empty: 0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, kind: QueryKind, split: Split) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file), kind, split)
    }
}

/// Fonts of `split` whose labels contain every tag index in `query`.
pub fn positives_for(manifest: &DatasetManifest, split: Split, query: &[usize]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for id in manifest.split(split) {
        let labels = manifest.labels(id)?;
        if query.iter().all(|&t| labels.contains(t)) {
            out.push(id.clone());
        }
    }
    out.sort();
    Ok(out)
}

fn single_query(manifest: &DatasetManifest, split: Split, tag: usize) -> Result<Query> {
    Ok(Query {
        tags: vec![manifest.vocabulary.tags()[tag].clone()],
        positives: positives_for(manifest, split, &[tag])?,
    })
}

/// The three query sets over the test split.
pub fn build_query_sets(manifest: &DatasetManifest, seed: u64) -> Result<QuerySets> {
    build_query_sets_for(manifest, Split::Test, seed, TOP_K)
}

pub fn build_query_sets_for(
    manifest: &DatasetManifest,
    split: Split,
    seed: u64,
    top_k: usize,
) -> Result<QuerySets> {
    if manifest.split(split).is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    let vocab = &manifest.vocabulary;

    let mut single_full = QuerySet {
        kind: QueryKind::SingleFull,
        split,
        queries: Vec::new(),
        dropped_empty: 0,
    };
    for t in 0..vocab.len() {
        let q = single_query(manifest, split, t)?;
        if q.positives.is_empty() {
            single_full.dropped_empty += 1;
        } else {
            single_full.queries.push(q);
        }
    }

    let mut single_top = QuerySet {
        kind: QueryKind::SingleTop,
        split,
        queries: Vec::new(),
        dropped_empty: 0,
    };
    for (tag, _) in vocab.by_frequency().into_iter().take(top_k.min(vocab.len())) {
        let t = vocab.index_of(tag).expect("tag from vocabulary");
        let q = single_query(manifest, split, t)?;
        if q.positives.is_empty() {
            single_top.dropped_empty += 1;
        } else {
            single_top.queries.push(q);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut multi = QuerySet {
        kind: QueryKind::Multi,
        split,
        queries: Vec::new(),
        dropped_empty: 0,
    };
    for id in manifest.split(split) {
        let labels = manifest.labels(id)?.indices();
        if labels.len() < MIN_QUERY_TAGS {
            continue;
        }
        for _ in 0..SUBSETS_PER_FONT {
            let size = rng
                .random_range(MIN_QUERY_TAGS..=MAX_QUERY_TAGS)
                .min(labels.len());
            let mut subset: Vec<usize> = sample(&mut rng, labels.len(), size)
                .into_iter()
                .map(|i| labels[i])
                .collect();
            subset.sort_unstable();
            if seen.insert(subset.clone()) {
                multi.queries.push(Query {
                    tags: subset.iter().map(|&t| vocab.tags()[t].clone()).collect(),
                    positives: positives_for(manifest, split, &subset)?,
                });
            }
        }
    }

    Ok(QuerySets {
        single_full,
        single_top,
        multi,
    })
}
