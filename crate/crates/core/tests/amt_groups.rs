use std::cell::RefCell;

use glyphtag_core::amt::{amt_eval, build_amt_groups, EvaluationGroup, ParameterOracle};
use glyphtag_core::manifest::{DatasetManifest, FontRecord, Splits};
use glyphtag_core::synth::{synthesize, SynthConfig};
use glyphtag_core::{Error, FontParams, TagVocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bold_trio() -> DatasetManifest {
    let font = |id: &str, w: f64, tags: &[&str]| FontRecord {
        font_id: id.into(),
        family_params: FontParams {
            stroke_width: w,
            ..FontParams::standard()
        },
        raw_tags: vec![],
        tags: tags.iter().map(|t| t.to_string()).collect(),
    };
    let fonts = vec![
        font("f-a", 0.9, &["bold"]),
        font("f-b", 0.5, &["bold"]),
        font("f-c", 0.45, &["bold"]),
        font("f-d", 0.05, &["thin"]),
    ];
    let vocab = TagVocabulary::new([("bold".to_string(), 3), ("thin".to_string(), 1)]).unwrap();
    let splits = Splits {
        test: fonts.iter().map(|f| f.font_id.clone()).collect(),
        ..Default::default()
    };
    DatasetManifest::new(1, fonts, splits, vocab, vec![]).unwrap()
}

#[test]
fn strongest_candidate_is_ground_truth() {
    let m = bold_trio();
    let groups = build_amt_groups(&m, 1, 0).unwrap();
    assert_eq!(groups.groups.len(), 1);
    assert_eq!(groups.groups[0].ground_truth, "f-a");
    assert_eq!(groups.skipped_tags, ["thin"]);
}

#[test]
fn unlabeled_candidate_is_rejected() {
    let m = bold_trio();
    let err = EvaluationGroup::new(&m, "bold", vec!["f-a".into(), "f-b".into(), "f-d".into()], "f-a");
    assert!(matches!(err, Err(Error::InvalidGroup { .. })));
}

fn corpus() -> DatasetManifest {
    synthesize(&SynthConfig::standard(600, 21)).unwrap()
}

#[test]
fn same_seed_same_groups() {
    let m = corpus();
    assert_eq!(build_amt_groups(&m, 40, 5).unwrap(), build_amt_groups(&m, 40, 5).unwrap());
}

#[test]
fn oracle_scorer_is_perfect() {
    let m = corpus();
    let groups = build_amt_groups(&m, 60, 1).unwrap();
    assert!(groups.groups.len() >= 30);
    let s = amt_eval(&groups.groups, &m.vocabulary, &ParameterOracle { manifest: &m }).unwrap();
    assert_eq!((s.accuracy, s.average_rank), (1.0, 1.0));
}

#[test]
fn uniform_scorer_matches_chance() {
    let m = corpus();
    let groups = build_amt_groups(&m, 50, 2).unwrap().groups;
    let rng = RefCell::new(ChaCha8Rng::seed_from_u64(77));
    let scorer = |_: &[usize], _: &str| -> Result<f64, String> { Ok(rng.borrow_mut().random::<f64>()) };
    let trials: Vec<EvaluationGroup> = groups.iter().cycle().take(10_000).cloned().collect();
    let s = amt_eval(&trials, &m.vocabulary, &scorer).unwrap();
    assert!((s.accuracy - 1.0 / 3.0).abs() < 0.02, "{}", s.accuracy);
    assert!((s.average_rank - 2.0).abs() < 0.03, "{}", s.average_rank);
}

#[test]
fn ties_count_as_misses() {
    let m = bold_trio();
    let groups = build_amt_groups(&m, 1, 0).unwrap().groups;
    let constant = |_: &[usize], _: &str| -> Result<f64, String> { Ok(0.5) };
    let s = amt_eval(&groups, &m.vocabulary, &constant).unwrap();
    assert_eq!((s.accuracy, s.average_rank), (0.0, 2.0));
}
