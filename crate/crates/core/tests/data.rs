mod common;

use common::ids;
use pomrec_core::data::{
    build_training_set, parse_interactions, sample_negative, sample_user_candidates, training_positions,
    FilterConfig, TextFormat, NUM_EVAL_NEGATIVES,
};
use pomrec_core::{InteractionStore, ItemId, Split, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TINY: &str = include_str!("fixtures/tiny.dat");

fn tiny() -> InteractionStore {
    parse_interactions(TINY, &TextFormat::movielens(), &FilterConfig::default()).unwrap().0
}

#[test]
fn fixture_loads_with_expected_shape() {
    let (store, report) = parse_interactions(TINY, &TextFormat::movielens(), &FilterConfig::default()).unwrap();
    assert_eq!(report.records, 14);
    // user 30 has two records and is dropped
    assert_eq!(store.num_users(), 3);
    assert_eq!(report.dropped_users, 1);
    assert_eq!(store.num_interactions(), 12);
    // item 106 only occurred for the dropped user
    assert_eq!(store.num_items(), 8);
    let labels = |u: UserId| -> Vec<String> {
        store.sequence(u).iter().map(|&i| store.item_label(i).to_string()).collect()
    };
    assert_eq!(labels(store.find_user("10").unwrap()), ["103", "100", "102", "101"]);
    // duplicate line kept twice, in file order
    assert_eq!(labels(store.find_user("20").unwrap()), ["101", "104", "104", "105"]);
    // tie on 978300050 keeps file order
    assert_eq!(labels(store.find_user("40").unwrap()), ["100", "102", "107", "108"]);
    assert_eq!(report.timestamp_ties, 2);
}

#[test]
fn split_sizes_per_user() {
    let store = tiny();
    let positions = training_positions(&store);
    for u in store.users() {
        let n = store.sequence(u).len();
        assert_eq!(positions.iter().filter(|(v, _)| *v == u).count(), n - 2);
        let (valid_prefix, _) = store.eval_query(u, Split::Valid);
        let (test_prefix, _) = store.eval_query(u, Split::Test);
        assert_eq!(valid_prefix.len(), n - 2);
        assert_eq!(test_prefix.len(), n - 1);
    }
}

#[test]
fn triplets_never_touch_held_out_targets_or_owned_negatives() {
    // sequences without repeats, so held-out items are distinct from
    // every training positive of the same user
    let store = InteractionStore::from_sequences(
        9,
        vec![ids(&[0, 1, 2]), ids(&[3, 4, 5, 6]), ids(&[8, 7, 6, 5, 4])],
    )
    .unwrap();
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in build_training_set(&store, &mut rng).unwrap() {
            assert!(!store.has_interacted(t.user, t.negative));
            for split in [Split::Valid, Split::Test] {
                let (_, truth) = store.eval_query(t.user, split);
                assert_ne!(t.positive, truth);
            }
        }
        for u in store.users() {
            for split in [Split::Valid, Split::Test] {
                let c = sample_user_candidates(&store, u, split, seed, NUM_EVAL_NEGATIVES);
                assert!(c.negatives.iter().all(|&i| !store.has_interacted(u, i)));
            }
        }
    }
}

#[test]
fn negative_sampling_is_uniform_over_eligible_items() {
    let owned: Vec<ItemId> = (0..20).map(|i| ItemId(i * 10)).collect();
    let store = InteractionStore::from_sequences(200, vec![owned]).unwrap();
    let user = UserId(0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut counts = vec![0usize; 200];
    let draws = 100_000;
    for _ in 0..draws {
        let item = sample_negative(&store, user, &mut rng).unwrap();
        assert!(!store.has_interacted(user, item));
        counts[item.index()] += 1;
    }
    let eligible = store.num_eligible_negatives(user);
    assert_eq!(eligible, 180);
    let expected = draws as f64 / eligible as f64;
    let chi2: f64 = (0..200)
        .filter(|&i| !store.has_interacted(user, ItemId(i as u32)))
        .map(|i| (counts[i] as f64 - expected).powi(2) / expected)
        .sum();
    let df = (eligible - 1) as f64;
    assert!((chi2 - df).abs() < 3.0 * (2.0 * df).sqrt(), "chi2 {chi2} df {df}");
}

#[test]
fn candidate_overlap_between_seeds_is_hypergeometric() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let seqs: Vec<Vec<ItemId>> = (0..100)
        .map(|_| (0..5).map(|_| ItemId(rng.random_range(0..1500))).collect())
        .collect();
    let store = InteractionStore::from_sequences(1500, seqs).unwrap();
    let mut observed = 0.0;
    let mut mean = 0.0;
    let mut var = 0.0;
    for u in store.users() {
        let a = sample_user_candidates(&store, u, Split::Test, 1, NUM_EVAL_NEGATIVES);
        let b = sample_user_candidates(&store, u, Split::Test, 2, NUM_EVAL_NEGATIVES);
        assert_eq!(a, sample_user_candidates(&store, u, Split::Test, 1, NUM_EVAL_NEGATIVES));
        let overlap = a.negatives.iter().filter(|i| b.negatives.binary_search(i).is_ok()).count();
        observed += overlap as f64;
        let n = store.num_eligible_negatives(u) as f64;
        let k = NUM_EVAL_NEGATIVES as f64;
        mean += k * k / n;
        var += k * (k / n) * ((n - k) / n) * ((n - k) / (n - 1.0));
    }
    assert!((observed - mean).abs() < 3.0 * var.sqrt(), "overlap {observed} vs {mean} ± {}", var.sqrt());
}
