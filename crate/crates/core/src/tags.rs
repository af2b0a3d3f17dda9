//! Tag normalization and the tag vocabulary.
//!
//! Raw crawled tags pass through, in order: lowercasing with table-driven
//! misspelling correction, rule-table lemmatization, joining multi-word tags
//! with hyphens, per-font de-duplication and finally a minimum training
//! frequency cut.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_MIN_COUNT: usize = 10;

const LEMMA_TABLE: &str = include_str!("../data/lemma_exceptions.tsv");
const MISSPELLING_TABLE: &str = include_str!("../data/misspellings.tsv");

/// Parses a two-column TSV table, skipping blank lines and `#` comments.
pub fn parse_tsv_table(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(k), Some(v), None) if !k.is_empty() && !v.is_empty() => {
                map.insert(k.to_string(), v.to_string());
            }
            _ => {
                return Err(Error::Malformed {
                    what: "tsv table",
                    message: format!("line {}: expected two tab-separated columns", lineno + 1),
                })
            }
        }
    }
    Ok(map)
}

/// Word-level rewrite tables.
#[derive(Debug, Clone)]
pub struct TagNormalizer {
    lemmas: HashMap<String, String>,
    corrections: HashMap<String, String>,
}

impl TagNormalizer {
    pub fn new(lemmas: HashMap<String, String>, corrections: HashMap<String, String>) -> Self {
        TagNormalizer {
            lemmas,
            corrections,
        }
    }

    /// The normalizer backed by the bundled tables.
    pub fn builtin() -> &'static TagNormalizer {
        static BUILTIN: OnceLock<TagNormalizer> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            TagNormalizer::new(
                parse_tsv_table(LEMMA_TABLE).expect("bundled lemma table"),
                parse_tsv_table(MISSPELLING_TABLE).expect("bundled misspelling table"),
            )
        })
    }

    fn tokenize(raw: &str) -> Vec<String> {
        raw.to_lowercase()
            .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
            .map(|w| w.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
            .filter(|w| !w.is_empty())
            .collect()
    }

    /// Suffix rules; words of three letters or fewer are left alone.
    fn lemmatize_word(&self, word: &str) -> String {
        if let Some(lemma) = self.lemmas.get(word) {
            return lemma.clone();
        }
        if word.chars().count() <= 3 {
            return word.to_string();
        }
        if let Some(stem) = word.strip_suffix("sses") {
            return format!("{stem}ss");
        }
        if word.len() > 4 {
            if let Some(stem) = word.strip_suffix("ies") {
                return format!("{stem}y");
            }
        }
        if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
            return word.to_string();
        }
        match word.strip_suffix('s') {
            Some(stem) => stem.to_string(),
            None => word.to_string(),
        }
    }

    fn rewrite_once(&self, words: &[String]) -> Vec<String> {
        words
            .iter()
            .flat_map(|w| {
                let corrected = self.corrections.get(w).cloned().unwrap_or_else(|| w.clone());
                Self::tokenize(&corrected)
                    .into_iter()
                    .map(|part| self.lemmatize_word(&part))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Canonical form of one raw tag, or `None` if nothing survives cleaning.
    pub fn normalize(&self, raw: &str) -> Option<String> {
        let mut words = Self::tokenize(raw);
        // Corrections and lemmas can feed each other; iterate to a fixed point.
        for _ in 0..8 {
            let next = self.rewrite_once(&words);
            if next == words {
                break;
            }
            words = next;
        }
        if words.is_empty() {
            None
        } else {
            Some(words.join("-"))
        }
    }
}

/// Canonical form of one raw tag using the bundled tables.
pub fn normalize_tag(raw: &str) -> Option<String> {
    TagNormalizer::builtin().normalize(raw)
}

/// Ordered tag space. Indices are positions in the lexicographically sorted
/// tag list and are therefore stable across save/load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TagVocabulary {
    tags: Vec<String>,
    frequency: Vec<usize>,
    #[serde(skip)]
    index: OnceLock<HashMap<String, usize>>,
}

impl PartialEq for TagVocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tags == other.tags && self.frequency == other.frequency
    }
}

impl TagVocabulary {
    /// Builds a vocabulary from `(tag, frequency)` pairs; tags are sorted and
    /// must be unique.
    pub fn new(entries: impl IntoIterator<Item = (String, usize)>) -> Result<Self> {
        let map: BTreeMap<String, usize> = entries.into_iter().try_fold(
            BTreeMap::new(),
            |mut acc, (tag, freq)| {
                if acc.insert(tag.clone(), freq).is_some() {
                    return Err(Error::Malformed {
                        what: "vocabulary",
                        message: format!("duplicate tag `{tag}`"),
                    });
                }
                Ok(acc)
            },
        )?;
        let (tags, frequency) = map.into_iter().unzip();
        Ok(TagVocabulary {
            tags,
            frequency,
            index: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn frequencies(&self) -> &[usize] {
        &self.frequency
    }

    pub fn tag(&self, index: usize) -> Option<&str> {
        self.tags.get(index).map(String::as_str)
    }

    pub fn frequency(&self, index: usize) -> usize {
        self.frequency[index]
    }

    pub fn index_of(&self, tag: &str) -> Option<usize> {
        self.index
            .get_or_init(|| {
                self.tags
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), i))
                    .collect()
            })
            .get(tag)
            .copied()
    }

    /// Vocabulary indices of `tags`, or every tag that is not in the vocabulary.
    pub fn encode<S: AsRef<str>>(&self, tags: &[S]) -> Result<Vec<usize>> {
        let mut unknown = Vec::new();
        let mut out = Vec::with_capacity(tags.len());
        for t in tags {
            match self.index_of(t.as_ref()) {
                Some(i) => out.push(i),
                None => unknown.push(t.as_ref().to_string()),
            }
        }
        if unknown.is_empty() {
            Ok(out)
        } else {
            Err(Error::UnknownTags(unknown))
        }
    }

    /// Tags ordered by descending frequency, ties lexicographic.
    pub fn by_frequency(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<(&str, usize)> = self
            .tags
            .iter()
            .map(String::as_str)
            .zip(self.frequency.iter().copied())
            .collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    /// Hex SHA-256 over the ordered tag list. Checkpoints record it so a model
    /// is never paired with a vocabulary it was not trained on.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tags {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Binary label vector over the vocabulary for one font.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagLabelVector {
    pub bits: Vec<u8>,
}

impl TagLabelVector {
    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut bits = vec![0u8; n];
        for &i in indices {
            bits[i] = 1;
        }
        TagLabelVector { bits }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.bits.get(index) == Some(&1)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

#[derive(Debug, Clone)]
pub struct NormalizedTags {
    pub vocabulary: TagVocabulary,
    /// Canonical surviving tags per input font, sorted; empty for dropped fonts.
    pub tags: Vec<Vec<String>>,
    /// Label vectors per input font; `None` for dropped fonts.
    pub labels: Vec<Option<TagLabelVector>>,
    /// Input positions of fonts left with no tags.
    pub dropped: Vec<usize>,
}

/// Normalizes every font's raw tags, counting frequencies over all fonts.
pub fn normalize_tags<S: AsRef<str>>(raw: &[Vec<S>], min_count: usize) -> Result<NormalizedTags> {
    let all = vec![true; raw.len()];
    normalize_tags_counted(raw, min_count, &all)
}

/// Like [`normalize_tags`], but only fonts with `counted[i]` (the training
/// split) contribute to tag frequencies.
pub fn normalize_tags_counted<S: AsRef<str>>(
    raw: &[Vec<S>],
    min_count: usize,
    counted: &[bool],
) -> Result<NormalizedTags> {
    if raw.is_empty() {
        return Err(Error::NoTagLists);
    }
    assert_eq!(raw.len(), counted.len(), "one `counted` flag per font");
    let norm = TagNormalizer::builtin();

    let per_font: Vec<BTreeSet<String>> = raw
        .iter()
        .map(|list| list.iter().filter_map(|t| norm.normalize(t.as_ref())).collect())
        .collect();

    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for (tags, _) in per_font.iter().zip(counted).filter(|(_, &c)| c) {
        for t in tags {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let vocabulary = TagVocabulary::new(
        freq.into_iter()
            .filter(|&(_, n)| n >= min_count)
            .map(|(t, n)| (t.to_string(), n)),
    )?;
    if vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary { min_count });
    }

    let mut tags = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    let mut dropped = Vec::new();
    for (i, font_tags) in per_font.iter().enumerate() {
        let kept: Vec<String> = font_tags
            .iter()
            .filter(|t| vocabulary.index_of(t).is_some())
            .cloned()
            .collect();
        if kept.is_empty() {
            dropped.push(i);
            labels.push(None);
        } else {
            let idx = vocabulary.encode(&kept)?;
            labels.push(Some(TagLabelVector::from_indices(vocabulary.len(), &idx)));
        }
        tags.push(kept);
    }
    Ok(NormalizedTags {
        vocabulary,
        tags,
        labels,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn crawled_tag_examples() {
        assert_eq!(normalize_tag("Sans Serif").as_deref(), Some("sans-serif"));
        assert_eq!(normalize_tag("kids").as_deref(), Some("kid"));
        assert_eq!(normalize_tag("  Sans  Serifs ").as_deref(), Some("sans-serif"));
        assert_eq!(normalize_tag("sans_serif").as_deref(), Some("sans-serif"));
        assert_eq!(normalize_tag("sanserif").as_deref(), Some("sans-serif"));
        assert_eq!(normalize_tag("Itallic").as_deref(), Some("italic"));
        assert_eq!(normalize_tag("Rounded").as_deref(), Some("round"));
        assert_eq!(normalize_tag("stories").as_deref(), Some("story"));
        assert_eq!(normalize_tag("glasses").as_deref(), Some("glass"));
        assert_eq!(normalize_tag("!!!"), None);
    }

    #[test]
    fn case_variants_merge_into_one_entry() {
        let raw = vec![vec!["bold"], vec!["Bold"], vec!["BOLD"]];
        let out = normalize_tags(&raw, 1).unwrap();
        assert_eq!(out.vocabulary.tags(), ["bold"]);
        assert_eq!(out.vocabulary.frequency(0), 3);

        // Within one font, duplicates count once.
        let raw = vec![vec!["bold", "Bold", "BOLD"]];
        let out = normalize_tags(&raw, 1).unwrap();
        assert_eq!(out.vocabulary.frequency(0), 1);
        assert_eq!(out.tags[0], vec!["bold".to_string()]);
    }

    #[test]
    fn infrequent_tags_are_removed() {
        let mut raw: Vec<Vec<&str>> = (0..9).map(|_| vec!["script", "bold"]).collect();
        raw.push(vec!["bold"]);
        let out = normalize_tags(&raw, 10).unwrap();
        // "script" occurs 9 times, "bold" 10 times.
        assert_eq!(out.vocabulary.tags(), ["bold"]);
    }

    #[test]
    fn frequency_only_counts_training_fonts() {
        let raw: Vec<Vec<&str>> = (0..12).map(|_| vec!["bold"]).collect();
        let mut counted = vec![true; 12];
        counted[0] = false;
        counted[1] = false;
        counted[2] = false;
        let err = normalize_tags_counted(&raw, 10, &counted).unwrap_err();
        assert!(matches!(err, Error::EmptyVocabulary { min_count: 10 }));
    }

    #[test]
    fn fonts_without_surviving_tags_are_dropped() {
        let mut raw: Vec<Vec<&str>> = (0..3).map(|_| vec!["bold"]).collect();
        raw.push(vec!["rare"]);
        let out = normalize_tags(&raw, 2).unwrap();
        assert_eq!(out.dropped, vec![3]);
        assert!(out.labels[3].is_none());
        assert_eq!(out.labels[0].as_ref().unwrap().indices(), vec![0]);
    }

    #[test]
    fn empty_input_is_an_error() {
        let raw: Vec<Vec<&str>> = Vec::new();
        assert!(matches!(normalize_tags(&raw, 1), Err(Error::NoTagLists)));
    }

    #[test]
    fn bundled_tables_are_fixed_points() {
        let n = TagNormalizer::builtin();
        for (_, v) in n.lemmas.iter().chain(n.corrections.iter()) {
            let once = n.normalize(v).unwrap();
            assert_eq!(n.normalize(&once).unwrap(), once, "{v}");
        }
    }

    #[test]
    fn encode_lists_unknown_tags() {
        let v = TagVocabulary::new([("bold".to_string(), 3), ("serif".to_string(), 2)]).unwrap();
        assert_eq!(v.encode(&["serif"]).unwrap(), vec![1]);
        match v.encode(&["zzz", "bold", "qq"]) {
            Err(Error::UnknownTags(u)) => assert_eq!(u, vec!["zzz", "qq"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn vocabulary_roundtrips_through_json() {
        let v = TagVocabulary::new([("b".to_string(), 1), ("a".to_string(), 5)]).unwrap();
        let back: TagVocabulary = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.index_of("b"), Some(1));
        assert_eq!(back.hash(), v.hash());
        assert_eq!(v.by_frequency(), vec![("a", 5), ("b", 1)]);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "[A-Za-z _-]{0,24}") {
            if let Some(once) = normalize_tag(&raw) {
                prop_assert_eq!(normalize_tag(&once), Some(once.clone()));
            }
        }

        #[test]
        fn normalize_tags_idempotent_on_lists(
            lists in prop::collection::vec(prop::collection::vec("[A-Za-z ]{1,12}", 1..4), 1..8)
        ) {
            if let Ok(first) = normalize_tags(&lists, 1) {
                let survivors: Vec<Vec<String>> = first
                    .tags
                    .iter()
                    .filter(|t| !t.is_empty())
                    .cloned()
                    .collect();
                let second = normalize_tags(&survivors, 1).unwrap();
                prop_assert_eq!(second.tags, survivors);
                prop_assert_eq!(second.vocabulary, first.vocabulary);
            }
        }
    }
}
