//! Leave-one-out ranking evaluation with sampled candidates.
//!
//! Each user's held-out item is ranked against its candidate negatives by
//! dot-product score. Score ties go to the lower item id. With a single
//! relevant item, Recall@N is a hit indicator and NDCG@N is
//! `1 / log2(rank + 1)` inside the cutoff.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{
    full_catalog_candidates, sample_user_candidates, EvalCandidates, InteractionStore, ItemId,
    Split, UserId, NUM_EVAL_NEGATIVES,
};
use crate::error::{Error, Result};
use crate::model::{user_embedding, ModelConfig, ModelParams};
use crate::numerics::dot_slices;

/// Reported cutoffs `N`.
pub const CUTOFFS: [usize; 3] = [5, 10, 20];

pub fn recall_at(rank: usize, n: usize) -> f64 {
    if rank >= 1 && rank <= n {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at(rank: usize, n: usize) -> f64 {
    if rank >= 1 && rank <= n {
        1.0 / libm::log2(rank as f64 + 1.0)
    } else {
        0.0
    }
}

/// Descending score, then ascending item id.
fn ranks_before(a: (ItemId, f64), b: (ItemId, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

/// Candidates ordered best first.
pub fn rank_candidates(
    user_embedding: &[f64],
    candidates: &[ItemId],
    params: &ModelParams,
) -> Result<Vec<(ItemId, f64)>> {
    let mut scored = candidates
        .iter()
        .map(|&item| Ok((item, dot_slices(user_embedding, params.item_embedding(item)?))))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|&a, &b| ranks_before(a, b));
    Ok(scored)
}

/// 1-based rank of `truth` among `truth` plus `others`, without sorting.
pub fn rank_of_truth(truth: (ItemId, f64), others: impl IntoIterator<Item = (ItemId, f64)>) -> usize {
    1 + others
        .into_iter()
        .filter(|&other| ranks_before(other, truth) == Ordering::Less)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub rank: usize,
    pub recall: [f64; 3],
    pub ndcg: [f64; 3],
}

impl UserMetrics {
    pub fn from_rank(rank: usize) -> Self {
        Self {
            rank,
            recall: CUTOFFS.map(|n| recall_at(rank, n)),
            ndcg: CUTOFFS.map(|n| ndcg_at(rank, n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    /// The truth plus this many uniformly sampled non-interacted items.
    Sampled { negatives: usize },
    /// Every non-interacted item.
    FullCatalog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub split: Split,
    pub seed: u64,
    pub candidates: CandidateMode,
    pub checkpoint_id: Option<String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            split: Split::Test,
            seed: 0,
            candidates: CandidateMode::Sampled {
                negatives: NUM_EVAL_NEGATIVES,
            },
            checkpoint_id: None,
        }
    }
}

impl EvalOptions {
    pub fn new(split: Split, seed: u64) -> Self {
        Self {
            split,
            seed,
            ..Self::default()
        }
    }

    pub fn candidates_for(&self, store: &InteractionStore, user: UserId) -> EvalCandidates {
        match self.candidates {
            CandidateMode::Sampled { negatives } => {
                sample_user_candidates(store, user, self.split, self.seed, negatives)
            }
            CandidateMode::FullCatalog => full_catalog_candidates(store, user, self.split),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserOutcome {
    pub user: UserId,
    pub metrics: UserMetrics,
    pub num_candidates: usize,
    pub short: bool,
}

/// Ranks one user's held-out item against its candidates.
pub fn evaluate_user(
    store: &InteractionStore,
    params: &ModelParams,
    cfg: &ModelConfig,
    user: UserId,
    opts: &EvalOptions,
) -> Result<UserOutcome> {
    let (prefix, _) = store.eval_query(user, opts.split);
    let candidates = opts.candidates_for(store, user);
    let e_u = user_embedding(prefix, params, cfg)?;
    let score = |item: ItemId| -> Result<(ItemId, f64)> {
        Ok((item, dot_slices(&e_u, params.item_embedding(item)?)))
    };
    let truth = score(candidates.truth)?;
    let others = candidates
        .negatives
        .iter()
        .map(|&i| score(i))
        .collect::<Result<Vec<_>>>()?;
    Ok(UserOutcome {
        user,
        metrics: UserMetrics::from_rank(rank_of_truth(truth, others)),
        num_candidates: candidates.len(),
        short: candidates.is_short(),
    })
}

/// Sum by recursive halving, so the rounding does not depend on how the
/// per-user values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: Split,
    pub cutoffs: [usize; 3],
    pub recall: [f64; 3],
    pub ndcg: [f64; 3],
    pub users: usize,
    pub seed: u64,
    pub candidates: CandidateMode,
    pub checkpoint_id: Option<String>,
    /// Users who had fewer eligible negatives than requested.
    pub short_candidate_users: usize,
    pub min_candidates: usize,
}

impl MetricsReport {
    /// Averages per-user outcomes, which must be in user order.
    pub fn from_outcomes(outcomes: &[UserOutcome], opts: &EvalOptions) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::EmptySplit);
        }
        let n = outcomes.len() as f64;
        let mean = |f: &dyn Fn(&UserOutcome) -> f64| {
            let values: Vec<f64> = outcomes.iter().map(f).collect();
            pairwise_sum(&values) / n
        };
        let recall = [0, 1, 2].map(|c| mean(&|o: &UserOutcome| o.metrics.recall[c]));
        let ndcg = [0, 1, 2].map(|c| mean(&|o: &UserOutcome| o.metrics.ndcg[c]));
        Ok(Self {
            split: opts.split,
            cutoffs: CUTOFFS,
            recall,
            ndcg,
            users: outcomes.len(),
            seed: opts.seed,
            candidates: opts.candidates,
            checkpoint_id: opts.checkpoint_id.clone(),
            short_candidate_users: outcomes.iter().filter(|o| o.short).count(),
            min_candidates: outcomes.iter().map(|o| o.num_candidates).min().unwrap_or(0),
        })
    }

    pub fn recall_at(&self, n: usize) -> Option<f64> {
        CUTOFFS.iter().position(|&c| c == n).map(|i| self.recall[i])
    }

    pub fn ndcg_at(&self, n: usize) -> Option<f64> {
        CUTOFFS.iter().position(|&c| c == n).map(|i| self.ndcg[i])
    }

    /// The model-selection metric, NDCG@10.
    pub fn selection_metric(&self) -> f64 {
        self.ndcg[1]
    }

    /// Range and monotonicity checks; lists every violation.
    pub fn check_invariants(&self) -> core::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        for (name, values) in [("recall", &self.recall), ("ndcg", &self.ndcg)] {
            for (i, v) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(v) {
                    problems.push(format!("{name}@{} = {v} outside [0, 1]", CUTOFFS[i]));
                }
            }
            for i in 1..values.len() {
                if values[i] < values[i - 1] {
                    problems.push(format!(
                        "{name}@{} = {} below {name}@{} = {}",
                        CUTOFFS[i],
                        values[i],
                        CUTOFFS[i - 1],
                        values[i - 1]
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

/// Evaluates every user in id order.
pub fn evaluate(
    store: &InteractionStore,
    params: &ModelParams,
    cfg: &ModelConfig,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    if params.num_items() != store.num_items() {
        return Err(Error::InvalidConfig(alloc::vec![format!(
            "model has {} items but the dataset has {}",
            params.num_items(),
            store.num_items()
        )]));
    }
    let outcomes = store
        .users()
        .map(|u| evaluate_user(store, params, cfg, u, opts))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_outcomes(&outcomes, opts)
}
