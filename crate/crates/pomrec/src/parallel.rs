//! Multi-threaded evaluation and the training observer used by the CLI.

use std::time::Instant;

use pomrec_core::eval::{evaluate_user, MetricsReport, UserOutcome};
use pomrec_core::training::{FitObserver, FitState};
use pomrec_core::{Error, EvalOptions, InteractionStore, ModelConfig, ModelParams, Result, UserId};
use rayon::prelude::*;

/// Same result as [`pomrec_core::evaluate`], bit for bit: users are scored
/// in parallel, then reduced in user order.
pub fn par_evaluate(
    store: &InteractionStore,
    params: &ModelParams,
    cfg: &ModelConfig,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    if params.num_items() != store.num_items() {
        return Err(Error::InvalidConfig(vec![format!(
            "model has {} items but the dataset has {}",
            params.num_items(),
            store.num_items()
        )]));
    }
    let users: Vec<UserId> = store.users().collect();
    let outcomes = users
        .par_iter()
        .map(|&u| evaluate_user(store, params, cfg, u, opts))
        .collect::<Result<Vec<UserOutcome>>>()?;
    MetricsReport::from_outcomes(&outcomes, opts)
}

type EpochHook<'a> = Box<dyn FnMut(&FitState) -> Result<()> + 'a>;

/// Parallel validation, an optional wall clock, and a per-epoch hook.
pub struct CliObserver<'a> {
    start: Option<Instant>,
    hook: Option<EpochHook<'a>>,
}

impl<'a> CliObserver<'a> {
    /// `clock = false` logs zero seconds, making log files byte-identical
    /// across reruns.
    pub fn new(clock: bool) -> Self {
        Self {
            start: clock.then(Instant::now),
            hook: None,
        }
    }

    pub fn on_epoch(mut self, hook: impl FnMut(&FitState) -> Result<()> + 'a) -> Self {
        self.hook = Some(Box::new(hook));
        self
    }
}

impl FitObserver for CliObserver<'_> {
    fn elapsed_seconds(&mut self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
    }

    fn evaluate(
        &mut self,
        store: &InteractionStore,
        params: &ModelParams,
        cfg: &ModelConfig,
        opts: &EvalOptions,
    ) -> Result<MetricsReport> {
        par_evaluate(store, params, cfg, opts)
    }

    fn after_epoch(&mut self, state: &FitState) -> Result<()> {
        match self.hook.as_mut() {
            Some(hook) => hook(state),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pomrec_core::eval::CandidateMode;
    use pomrec_core::{evaluate, ItemId, Split};

    #[test]
    fn parallel_matches_sequential_bit_for_bit() {
        let seqs = (0..40u32)
            .map(|u| (0..5 + u % 4).map(|j| ItemId((u * 7 + j * 11) % 50)).collect())
            .collect();
        let store = InteractionStore::from_sequences(50, seqs).unwrap();
        let cfg = ModelConfig::with_dims(4, 3);
        let params = ModelParams::init(&cfg, 50, 2).unwrap();
        for opts in [
            EvalOptions::new(Split::Test, 5),
            EvalOptions {
                candidates: CandidateMode::FullCatalog,
                ..EvalOptions::new(Split::Valid, 1)
            },
        ] {
            let a = evaluate(&store, &params, &cfg, &opts).unwrap();
            let b = par_evaluate(&store, &params, &cfg, &opts).unwrap();
            assert_eq!(a, b);
            assert!(a.recall.iter().zip(&b.recall).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
