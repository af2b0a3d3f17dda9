use std::collections::BTreeSet;

use glyphtag_core::metrics::{average_precision, ndcg, RankingResult};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Precision at each relevant cut-off, averaged over relevant items.
fn brute_ap(rel: &[bool]) -> f64 {
    let h = rel.iter().filter(|&&r| r).count();
    let mut total = 0.0;
    for k in 1..=rel.len() {
        if rel[k - 1] {
            let hits = rel[..k].iter().filter(|&&r| r).count();
            total += hits as f64 / k as f64;
        }
    }
    total / h as f64
}

/// Graded-gain DCG with the ideal order found by sorting gains.
fn brute_ndcg(rel: &[bool]) -> f64 {
    let gains: Vec<f64> = rel.iter().map(|&r| 2f64.powi(r as i32) - 1.0).collect();
    let dcg = |g: &[f64]| -> f64 {
        g.iter()
            .enumerate()
            .map(|(i, &x)| x / ((i + 1) as f64 + 1.0).log2())
            .sum()
    };
    let mut ideal = gains.clone();
    ideal.sort_by(|a, b| b.partial_cmp(a).unwrap());
    dcg(&gains) / dcg(&ideal)
}

fn ranking_from(rel: &[bool]) -> RankingResult {
    let n = rel.len();
    let scores = (0..n).map(|i| (format!("font-{i:03}"), (n - i) as f64 / n as f64)).collect();
    let positives = (0..n).filter(|&i| rel[i]).map(|i| format!("font-{i:03}")).collect();
    RankingResult::new(vec!["t".into()], scores, positives).unwrap()
}

#[test]
fn ap_and_ndcg_match_brute_force_on_random_rankings() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(1..=20);
        let rel: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if !rel.iter().any(|&r| r) {
            continue;
        }
        let r = ranking_from(&rel);
        assert!((average_precision(&r).unwrap() - brute_ap(&rel)).abs() < 1e-9);
        assert!((ndcg(&r).unwrap() - brute_ndcg(&rel)).abs() < 1e-9);
        checked += 1;
    }
}

#[test]
fn hand_fixtures() {
    let mut rel = vec![false; 10];
    rel[0] = true;
    rel[2] = true;
    assert!((average_precision(&ranking_from(&rel)).unwrap() - 5.0 / 6.0).abs() <= f64::EPSILON);
    let r = ranking_from(&[true, false, true]);
    let expected = 1.5 / (1.0 + 1.0 / 3f64.log2());
    assert_eq!(ndcg(&r).unwrap(), expected);
    assert!((expected - 0.9198).abs() < 1e-4);
}

fn rel_strategy() -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), 1..30).prop_filter("needs a positive", |v| v.iter().any(|&r| r))
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_perfect_iff_positives_lead(rel in rel_strategy()) {
        let r = ranking_from(&rel);
        let ap = average_precision(&r).unwrap();
        let nd = ndcg(&r).unwrap();
        prop_assert!((0.0..=1.0).contains(&ap));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&nd));
        let h = rel.iter().filter(|&&x| x).count();
        let leads = rel[..h].iter().all(|&x| x);
        prop_assert_eq!(ap == 1.0, leads);
        prop_assert_eq!((nd - 1.0).abs() < 1e-12, leads);
    }

    #[test]
    fn invariant_to_positive_order_and_order_preserving_shifts(
        rel in rel_strategy(),
        shift in 0.0f64..0.5,
        seed in any::<u64>(),
    ) {
        let n = rel.len();
        let ids: Vec<String> = (0..n).map(|i| format!("font-{i:03}")).collect();
        let scores: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        let positives: BTreeSet<String> = (0..n).filter(|&i| rel[i]).map(|i| ids[i].clone()).collect();
        let base = RankingResult::new(vec![], ids.iter().cloned().zip(scores.iter().copied()).collect(), positives.clone()).unwrap();

        // Shuffled input order, and positives nudged up by less than the score gap.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs: Vec<(String, f64)> = ids
            .iter()
            .cloned()
            .zip(scores.iter().copied())
            .map(|(id, s)| { let s = if positives.contains(&id) { s + shift } else { s }; (id, s) })
            .collect();
        for i in (1..pairs.len()).rev() {
            let j = rng.random_range(0..=i);
            pairs.swap(i, j);
        }
        let moved = RankingResult::new(vec![], pairs, positives).unwrap();
        prop_assert_eq!(average_precision(&base), average_precision(&moved));
        prop_assert_eq!(ndcg(&base), ndcg(&moved));
    }
}
