use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::store::{InteractionStore, ItemId, Split, UserId};
use crate::error::{Error, Result};

/// Negatives per evaluation candidate set.
pub const NUM_EVAL_NEGATIVES: usize = 999;

/// "User `u` prefers the item that followed `sequence[..prefix_len]` over
/// `negative`."
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingTriplet {
    pub user: UserId,
    /// Number of items before the positive; `0` means the model sees an
    /// all-padding window.
    pub prefix_len: usize,
    pub positive: ItemId,
    pub negative: ItemId,
}

impl TrainingTriplet {
    pub fn prefix<'s>(&self, store: &'s InteractionStore) -> &'s [ItemId] {
        &store.sequence(self.user)[..self.prefix_len]
    }
}

/// Every `(user, prefix_len)` whose next item lies in the training region:
/// `N_u - 2` positions per user, in user order.
pub fn training_positions(store: &InteractionStore) -> Vec<(UserId, usize)> {
    store
        .users()
        .flat_map(|u| (0..store.train_region(u).len()).map(move |t| (u, t)))
        .collect()
}

/// Uniform draw from the items `user` never interacted with.
pub fn sample_negative<R: Rng + ?Sized>(
    store: &InteractionStore,
    user: UserId,
    rng: &mut R,
) -> Result<ItemId> {
    if store.num_eligible_negatives(user) == 0 {
        return Err(Error::NoNegatives { user: user.index() });
    }
    loop {
        let item = ItemId::new(rng.random_range(0..store.num_items()));
        if !store.has_interacted(user, item) {
            return Ok(item);
        }
    }
}

/// One triplet per training position, in position order, each with a
/// fresh negative from `rng`.
pub fn build_training_set<R: Rng + ?Sized>(
    store: &InteractionStore,
    rng: &mut R,
) -> Result<Vec<TrainingTriplet>> {
    training_positions(store)
        .into_iter()
        .map(|(user, t)| {
            Ok(TrainingTriplet {
                user,
                prefix_len: t,
                positive: store.sequence(user)[t],
                negative: sample_negative(store, user, rng)?,
            })
        })
        .collect()
}

/// Ground truth plus negatives for one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalCandidates {
    pub user: UserId,
    pub truth: ItemId,
    pub negatives: Vec<ItemId>,
    pub seed: u64,
    /// How many negatives were asked for; more than `negatives.len()` when
    /// the user had too few eligible items.
    pub requested: usize,
}

impl EvalCandidates {
    pub fn len(&self) -> usize {
        1 + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_short(&self) -> bool {
        self.negatives.len() < self.requested
    }

    /// The truth followed by the negatives.
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        core::iter::once(self.truth).chain(self.negatives.iter().copied())
    }
}

fn eligible_items(store: &InteractionStore, user: UserId) -> Vec<ItemId> {
    let taken = store.interacted(user);
    let mut out = Vec::with_capacity(store.num_eligible_negatives(user));
    let mut next = 0;
    for i in 0..store.num_items() {
        let item = ItemId::new(i);
        if next < taken.len() && taken[next] == item {
            next += 1;
        } else {
            out.push(item);
        }
    }
    out
}

/// `num_negatives` distinct uniform negatives for one user, fixed by
/// `(seed, user, split)`. A user with fewer eligible items gets all of them.
pub fn sample_user_candidates(
    store: &InteractionStore,
    user: UserId,
    split: Split,
    seed: u64,
    num_negatives: usize,
) -> EvalCandidates {
    let (_, truth) = store.eval_query(user, split);
    let eligible = eligible_items(store, user);
    let negatives = if eligible.len() <= num_negatives {
        eligible
    } else {
        let user_seed = crate::derive_seed(seed, &[split.tag(), user.index() as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(user_seed);
        let mut picked: Vec<ItemId> = index::sample(&mut rng, eligible.len(), num_negatives)
            .into_iter()
            .map(|k| eligible[k])
            .collect();
        picked.sort_unstable();
        picked
    };
    EvalCandidates {
        user,
        truth,
        negatives,
        seed,
        requested: num_negatives,
    }
}

/// The standard 999-negative candidate set for every user.
pub fn sample_eval_candidates(store: &InteractionStore, split: Split, seed: u64) -> Vec<EvalCandidates> {
    store
        .users()
        .map(|u| sample_user_candidates(store, u, split, seed, NUM_EVAL_NEGATIVES))
        .collect()
}

/// Every non-interacted item as a negative.
pub fn full_catalog_candidates(store: &InteractionStore, user: UserId, split: Split) -> EvalCandidates {
    let (_, truth) = store.eval_query(user, split);
    let negatives = eligible_items(store, user);
    EvalCandidates {
        user,
        truth,
        requested: negatives.len(),
        negatives,
        seed: 0,
    }
}
