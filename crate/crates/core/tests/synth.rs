mod common;

use common::recovery;
use pomrec_core::synth::{generate, interest_recovery, within_pool_variance, MixtureKind, SynthSpec};
use pomrec_core::{fit, Error, ModelConfig, ModelParams, TrainConfig};

#[test]
fn single_pool_world_draws_every_item_from_it() {
    let world = generate(&SynthSpec {
        num_interests: 1,
        num_users: 50,
        ..SynthSpec::default()
    })
    .unwrap();
    for u in world.store.users() {
        for &i in world.store.sequence(u) {
            assert_eq!(world.truth.item_pool[i.index()], Some(0));
        }
    }
}

#[test]
fn one_hot_mixtures_keep_each_user_in_one_pool() {
    let world = generate(&SynthSpec {
        mixture: MixtureKind::OneHot,
        num_users: 100,
        ..SynthSpec::default()
    })
    .unwrap();
    for u in world.store.users() {
        let pools: Vec<_> = world.store.sequence(u).iter().map(|i| world.truth.item_pool[i.index()]).collect();
        assert!(pools.iter().all(|&p| p == pools[0]), "user {u:?}: {pools:?}");
    }
}

/// Pearson statistic of every user's pool counts against their mixture,
/// pooled over users; with stickiness 0 each step is an independent draw.
fn pooled_chi_square(mixture: MixtureKind) -> (f64, f64) {
    let world = generate(&SynthSpec {
        mixture,
        stickiness: 0.0,
        seed: 29,
        ..SynthSpec::default()
    })
    .unwrap();
    let mut stat = 0.0;
    let mut df = 0.0;
    for u in world.store.users() {
        let seq = world.store.sequence(u);
        let mut counts = [0.0; 3];
        for &i in seq {
            counts[world.truth.item_pool[i.index()].unwrap()] += 1.0;
        }
        let mix = &world.truth.user_mixtures[u.index()];
        let mut cells = 0.0;
        for g in 0..3 {
            let expected = mix[g] * seq.len() as f64;
            // cells with negligible expectation carry no information
            if expected < 1e-9 {
                continue;
            }
            stat += (counts[g] - expected).powi(2) / expected;
            cells += 1.0;
        }
        df += cells - 1.0;
    }
    (stat, df)
}

#[test]
fn balanced_pool_frequencies_match_mixtures() {
    let (stat, df) = pooled_chi_square(MixtureKind::Balanced);
    assert_eq!(df, 1000.0);
    assert!((stat - df).abs() <= 3.0 * (2.0 * df).sqrt(), "chi2 {stat} df {df}");
}

#[test]
fn dirichlet_pool_frequencies_match_mixtures() {
    let (stat, df) = pooled_chi_square(MixtureKind::Dirichlet { concentration: 2.0 });
    // small expected counts inflate the variance of Pearson's statistic
    assert!((stat - df).abs() <= 4.0 * (2.0 * df).sqrt(), "chi2 {stat} df {df}");
}

#[test]
fn generation_is_seed_deterministic() {
    let spec = SynthSpec {
        num_users: 80,
        ..SynthSpec::default()
    };
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.truth, b.truth);
    assert!(a.store.users().all(|u| a.store.sequence(u) == b.store.sequence(u)));
    let c = generate(&SynthSpec { seed: 1, ..spec }).unwrap();
    assert_ne!(a.truth.user_interests, c.truth.user_interests);
}

#[test]
fn oversized_pools_are_named_in_the_error() {
    let err = generate(&SynthSpec {
        pool_size: 120,
        ..SynthSpec::default()
    })
    .unwrap_err();
    match err {
        Error::PoolSizing(msg) => assert!(msg.contains("pool 2"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

fn recovery_config() -> ModelConfig {
    ModelConfig {
        num_interests: 3,
        num_prompts: 2,
        hidden_dim: 32,
        dispersion_weight: 1.0,
        ..ModelConfig::with_dims(16, 10)
    }
}

#[test]
fn untrained_purity_sits_at_the_permutation_baseline() {
    let world = generate(&SynthSpec::default()).unwrap();
    let cfg = recovery_config();
    let params = ModelParams::init(&cfg, 300, 5).unwrap();
    let report = interest_recovery(&params, &cfg, &world.store, &world.truth).unwrap();

    let assigned = recovery::assignments(&params, &cfg, &world);
    let pool_of = recovery::pool_labels(&world);
    assert_eq!(assigned.len(), report.items);
    assert!((recovery::purity(&assigned, &pool_of, 3) - report.purity).abs() < 1e-12);

    // null: item pool labels shuffled, assignments kept
    let (mean, sd) = recovery::permutation_null(&assigned, &pool_of, 3, 300, 99);
    assert!((report.purity - mean).abs() <= 3.0 * sd, "purity {} null {mean} ± {sd}", report.purity);
    assert!((mean - 1.0 / 3.0).abs() < 0.1, "null mean {mean}");
}

#[test]
fn single_interest_recovery_is_pure_by_definition() {
    let world = generate(&SynthSpec {
        num_interests: 1,
        num_users: 20,
        ..SynthSpec::default()
    })
    .unwrap();
    let cfg = ModelConfig {
        num_interests: 1,
        ..ModelConfig::with_dims(4, 5)
    };
    let params = ModelParams::init(&cfg, 300, 0).unwrap();
    assert_eq!(interest_recovery(&params, &cfg, &world.store, &world.truth).unwrap().purity, 1.0);
    let three = recovery_config();
    let params = ModelParams::init(&three, 300, 0).unwrap();
    assert!(matches!(
        interest_recovery(&params, &three, &world.store, &world.truth),
        Err(Error::InterestMismatch { .. })
    ));
}

#[test]
fn within_pool_variance_grows_with_dispersion() {
    let cfg = ModelConfig {
        num_interests: 3,
        num_prompts: 1,
        hidden_dim: 16,
        dispersion_weight: 1.0,
        ..ModelConfig::with_dims(8, 10)
    };
    let mean_variance = |dispersion: f64| {
        let mut total = 0.0;
        for seed in 0..3 {
            let world = generate(&SynthSpec {
                num_users: 200,
                dispersion,
                seed,
                ..SynthSpec::default()
            })
            .unwrap();
            let tcfg = TrainConfig {
                batch_size: 64,
                learning_rate: 1e-2,
                max_epochs: 8,
                patience: 8,
                seed,
                ..TrainConfig::default()
            };
            let run = fit(&world.store, &cfg, &tcfg).unwrap();
            total += within_pool_variance(&run.params, &world.store, &world.truth).unwrap();
        }
        total / 3.0
    };
    let low = mean_variance(0.5);
    let high = mean_variance(5.0);
    assert!(high > low, "dispersion 0.5 -> {low}, 5.0 -> {high}");
}
