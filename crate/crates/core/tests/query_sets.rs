use std::collections::BTreeSet;

use glyphtag_core::manifest::{DatasetManifest, FontRecord, Split, Splits};
use glyphtag_core::queries::{build_query_sets, build_query_sets_for, QueryKind, QuerySet};
use glyphtag_core::synth::synthesize_corpus;
use glyphtag_core::{FontParams, TagVocabulary};

fn toy(fonts: &[(&str, &[&str])]) -> DatasetManifest {
    let records: Vec<FontRecord> = fonts
        .iter()
        .map(|(id, tags)| {
            let mut tags: Vec<String> = tags.iter().map(|t| t.to_string()).collect();
            tags.sort();
            FontRecord {
                font_id: id.to_string(),
                family_params: FontParams::standard(),
                raw_tags: tags.clone(),
                tags,
            }
        })
        .collect();
    let mut vocab = BTreeSet::new();
    for r in &records {
        vocab.extend(r.tags.iter().cloned());
    }
    let vocabulary = TagVocabulary::new(vocab.into_iter().map(|t| (t, 1))).unwrap();
    let splits = Splits {
        test: records.iter().map(|r| r.font_id.clone()).collect(),
        ..Default::default()
    };
    DatasetManifest::new(0, records, splits, vocabulary, vec![]).unwrap()
}

fn five_fonts() -> DatasetManifest {
    toy(&[
        ("a", &["bold", "round"]),
        ("b", &["bold", "round"]),
        ("c", &["bold", "round", "serif"]),
        ("d", &["serif", "thin", "italic", "wide", "clean", "formal"]),
        ("e", &["serif"]),
    ])
}

#[test]
fn two_tag_font_yields_its_full_pair() {
    let m = toy(&[("a", &["bold", "round"]), ("b", &["serif"])]);
    let sets = build_query_sets(&m, 3).unwrap();
    assert_eq!(sets.multi.queries.len(), 1);
    assert_eq!(sets.multi.queries[0].tags, ["bold", "round"]);
    assert_eq!(sets.multi.queries[0].positives, ["a"]);
}

#[test]
fn duplicate_subsets_merge_and_positives_are_exact() {
    let m = five_fonts();
    for seed in 0..20 {
        let sets = build_query_sets(&m, seed).unwrap();
        let multi = &sets.multi.queries;
        let unique: BTreeSet<&Vec<String>> = multi.iter().map(|q| &q.tags).collect();
        assert_eq!(unique.len(), multi.len(), "duplicate query");

        let pair = multi
            .iter()
            .find(|q| q.tags == ["bold", "round"])
            .expect("fonts a and b both produce {bold, round}");
        assert_eq!(pair.positives, ["a", "b", "c"]);

        for q in multi {
            assert!((2..=5).contains(&q.tags.len()));
            let expected: Vec<String> = m
                .fonts
                .iter()
                .filter(|f| q.tags.iter().all(|t| f.tags.contains(t)))
                .map(|f| f.font_id.clone())
                .collect();
            assert_eq!(q.positives, expected);
            assert!(!q.positives.is_empty());
        }
    }
}

#[test]
fn single_sets() {
    let m = five_fonts();
    let sets = build_query_sets(&m, 0).unwrap();
    let tags: Vec<&str> = sets.single_full.queries.iter().map(|q| q.tags[0].as_str()).collect();
    assert_eq!(tags, m.vocabulary.tags().iter().map(String::as_str).collect::<Vec<_>>());
    let serif = sets.single_full.queries.iter().find(|q| q.tags == ["serif"]).unwrap();
    assert_eq!(serif.positives, ["c", "d", "e"]);
    assert_eq!(sets.single_top.len(), m.vocabulary.len().min(300));
}

#[test]
fn synthetic_sets_are_well_formed_and_deterministic() {
    let m = synthesize_corpus(300, 8).unwrap();
    let a = build_query_sets(&m, 1).unwrap();
    let b = build_query_sets(&m, 1).unwrap();
    assert_eq!(a, b);
    let test: Vec<_> = m.split(Split::Test).iter().map(|id| m.font(id).unwrap()).collect();
    for set in a.iter() {
        for q in &set.queries {
            assert!(!q.positives.is_empty());
            assert!(test.iter().any(|f| q.tags.iter().all(|t| f.tags.contains(t))));
        }
    }
    // Top-K counts queries by training frequency, so its order follows it.
    let freqs: Vec<usize> = a
        .single_top
        .queries
        .iter()
        .map(|q| m.vocabulary.frequency(m.vocabulary.index_of(&q.tags[0]).unwrap()))
        .collect();
    assert!(freqs.windows(2).all(|w| w[0] >= w[1]));
    let val = build_query_sets_for(&m, Split::Val, 1, 5).unwrap();
    assert!(val.single_top.len() + val.single_top.dropped_empty <= 5);
}

#[test]
fn jsonl_roundtrip() {
    let m = synthesize_corpus(120, 2).unwrap();
    let sets = build_query_sets(&m, 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("multi.jsonl");
    sets.multi.save(&path).unwrap();
    let back = QuerySet::load(&path, QueryKind::Multi, Split::Test).unwrap();
    assert_eq!(back.queries, sets.multi.queries);
    assert!(QuerySet::load(&path, QueryKind::SingleFull, Split::Test).is_err());
}
