//! Planted multi-interest worlds.
//!
//! `G` disjoint pools of items are laid out on rings. Every user has a
//! mixture over the pools and a favourite position (centre) in each pool.
//! A sequence is drawn step by step: keep the previous interest with
//! probability `stickiness`, otherwise draw one from the mixture, then take
//! the item at `centre + round(N(0, dispersion))` around that pool's ring.
//! Items outside every pool never occur in sequences and only serve as
//! negatives.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{InteractionStore, ItemId, UserId};
use crate::error::{Error, Result};
use crate::model::{user_state, ModelConfig, ModelParams};

const POOL_TAG: u64 = 0x5007;
const USER_TAG: u64 = 0x05E5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MixtureKind {
    /// Equal weight on every pool.
    Balanced,
    /// All weight on one uniformly chosen pool.
    OneHot,
    /// Symmetric Dirichlet draw with the given concentration.
    Dirichlet { concentration: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_users: usize,
    pub num_items: usize,
    /// `G`
    pub num_interests: usize,
    pub pool_size: usize,
    pub mixture: MixtureKind,
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation, in ring steps, of items around a user's centre.
    pub dispersion: f64,
    /// Probability of keeping the previous step's interest.
    pub stickiness: f64,
    /// When an interest is not kept, draw the next one from the mixture
    /// with the current interest excluded.
    pub switching: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_users: 500,
            num_items: 300,
            num_interests: 3,
            pool_size: 100,
            mixture: MixtureKind::Balanced,
            min_len: 15,
            max_len: 25,
            dispersion: 1.0,
            stickiness: 0.7,
            switching: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_users == 0 {
            problems.push("num_users must be at least 1".into());
        }
        if self.num_interests == 0 {
            problems.push("num_interests must be at least 1".into());
        }
        if self.min_len < InteractionStore::MIN_SEQUENCE {
            problems.push(format!(
                "min_len must be at least {}, got {}",
                InteractionStore::MIN_SEQUENCE,
                self.min_len
            ));
        }
        if self.max_len < self.min_len {
            problems.push(format!("max_len {} is below min_len {}", self.max_len, self.min_len));
        }
        if !(self.dispersion >= 0.0 && self.dispersion.is_finite()) {
            problems.push(format!("dispersion must be finite and non-negative, got {}", self.dispersion));
        }
        if !(0.0..1.0).contains(&self.stickiness) {
            problems.push(format!("stickiness must lie in [0, 1), got {}", self.stickiness));
        }
        if let MixtureKind::Dirichlet { concentration } = self.mixture {
            if !(concentration > 0.0 && concentration.is_finite()) {
                problems.push(format!("dirichlet concentration must be positive, got {concentration}"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        if self.pool_size < 2 {
            return Err(Error::PoolSizing(format!(
                "pool 0 has {} items; every pool needs at least 2",
                self.pool_size
            )));
        }
        if self.num_interests * self.pool_size > self.num_items {
            let first_short = self.num_items / self.pool_size;
            return Err(Error::PoolSizing(format!(
                "pool {first_short} does not fit: {} pools of {} items need {} items but the catalog has {}",
                self.num_interests,
                self.pool_size,
                self.num_interests * self.pool_size,
                self.num_items
            )));
        }
        if self.max_len >= self.num_items {
            return Err(Error::PoolSizing(format!(
                "sequences of up to {} items leave no negatives in a catalog of {}",
                self.max_len, self.num_items
            )));
        }
        Ok(())
    }
}

/// What the generator planted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub num_interests: usize,
    /// Items of each pool in ring order.
    pub pools: Vec<Vec<ItemId>>,
    /// `item_pool[i]` is the pool of item `i`, if any.
    pub item_pool: Vec<Option<usize>>,
    pub user_mixtures: Vec<Vec<f64>>,
    /// Ring position of each user's centre in each pool.
    pub user_centers: Vec<Vec<usize>>,
    /// Pool drawn at every step of every sequence.
    pub user_interests: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub spec: SynthSpec,
    pub store: InteractionStore,
    pub truth: GroundTruth,
}

fn mixture<R: Rng>(kind: MixtureKind, g: usize, rng: &mut R) -> Result<Vec<f64>> {
    Ok(match kind {
        MixtureKind::Balanced => vec![1.0 / g as f64; g],
        MixtureKind::OneHot => {
            let mut m = vec![0.0; g];
            m[rng.random_range(0..g)] = 1.0;
            m
        }
        MixtureKind::Dirichlet { concentration } => {
            let gamma = Gamma::new(concentration, 1.0)
                .map_err(|e| Error::InvalidConfig(vec![format!("{e}")]))?;
            let draws: Vec<f64> = (0..g).map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE)).collect();
            let total: f64 = draws.iter().sum();
            draws.iter().map(|d| d / total).collect()
        }
    })
}

fn draw_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let mut u: f64 = rng.random();
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding left a sliver of mass; give it to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// The mixture with `current` removed and renormalized; stays put when no
/// other interest has weight.
fn switch_from<R: Rng>(weights: &[f64], current: usize, rng: &mut R) -> usize {
    let rest: f64 = weights.iter().enumerate().filter(|&(i, _)| i != current).map(|(_, w)| w).sum();
    if rest <= 0.0 {
        return current;
    }
    let others: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| if i == current { 0.0 } else { w / rest })
        .collect();
    draw_index(&others, rng)
}

/// Draws a world. Each user has its own derived stream, so user `u`'s
/// sequence does not depend on how many users precede it.
pub fn generate(spec: &SynthSpec) -> Result<SynthWorld> {
    spec.validate()?;
    let g = spec.num_interests;
    let mut pool_rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(spec.seed, &[POOL_TAG]));
    let mut ids: Vec<usize> = (0..spec.num_items).collect();
    ids.shuffle(&mut pool_rng);
    let mut item_pool = vec![None; spec.num_items];
    let pools: Vec<Vec<ItemId>> = (0..g)
        .map(|p| {
            ids[p * spec.pool_size..(p + 1) * spec.pool_size]
                .iter()
                .map(|&i| {
                    item_pool[i] = Some(p);
                    ItemId::new(i)
                })
                .collect()
        })
        .collect();

    let noise = Normal::new(0.0, spec.dispersion).map_err(|e| Error::InvalidConfig(vec![format!("{e}")]))?;
    let ring = spec.pool_size as i64;
    let mut sequences = Vec::with_capacity(spec.num_users);
    let mut user_mixtures = Vec::with_capacity(spec.num_users);
    let mut user_centers = Vec::with_capacity(spec.num_users);
    let mut user_interests = Vec::with_capacity(spec.num_users);
    for u in 0..spec.num_users {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(spec.seed, &[USER_TAG, u as u64]));
        let mix = mixture(spec.mixture, g, &mut rng)?;
        let centers: Vec<usize> = (0..g).map(|_| rng.random_range(0..spec.pool_size)).collect();
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let mut seq = Vec::with_capacity(len);
        let mut interests = Vec::with_capacity(len);
        let mut current = draw_index(&mix, &mut rng);
        for step in 0..len {
            if step > 0 && rng.random::<f64>() >= spec.stickiness {
                current = if spec.switching {
                    switch_from(&mix, current, &mut rng)
                } else {
                    draw_index(&mix, &mut rng)
                };
            }
            let offset = libm::round(noise.sample(&mut rng)) as i64;
            let pos = (centers[current] as i64 + offset).rem_euclid(ring) as usize;
            seq.push(pools[current][pos]);
            interests.push(current);
        }
        sequences.push(seq);
        user_mixtures.push(mix);
        user_centers.push(centers);
        user_interests.push(interests);
    }
    let store = InteractionStore::from_sequences(spec.num_items, sequences)?;
    Ok(SynthWorld {
        spec: spec.clone(),
        store,
        truth: GroundTruth {
            num_interests: g,
            pools,
            item_pool,
            user_mixtures,
            user_centers,
            user_interests,
        },
    })
}

/// Maximum-weight perfect matching on a square matrix, as
/// `assignment[row] = column`. Hungarian method on the negated weights.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -weights[i][j];
    // potentials and matching, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub purity: f64,
    /// `confusion[k][g]`: window items assigned to interest `k` that belong
    /// to pool `g`.
    pub confusion: Vec<Vec<usize>>,
    /// Pool matched to each interest.
    pub assignment: Vec<usize>,
    pub items: usize,
}

/// Assigns every item in each user's window to its argmax column of `A_F`
/// and scores the best interest-to-pool matching.
pub fn interest_recovery(
    params: &ModelParams,
    cfg: &ModelConfig,
    store: &InteractionStore,
    truth: &GroundTruth,
) -> Result<RecoveryReport> {
    let k = cfg.num_interests;
    let g = truth.num_interests;
    if k != g {
        return Err(Error::InterestMismatch {
            interests: k,
            planted: g,
        });
    }
    let mut confusion = vec![vec![0usize; g]; k];
    let mut items = 0;
    for u in store.users() {
        let seq = store.sequence(u);
        let (trace, _) = user_state(seq, params, cfg)?;
        let window = crate::model::window(seq, cfg.seq_len);
        for (pos, slot) in window.iter().enumerate() {
            let Some(item) = slot else { continue };
            let Some(pool) = truth.item_pool.get(*item).copied().flatten() else {
                continue;
            };
            let row = trace.attention.row(cfg.prompts() + pos);
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            confusion[best][pool] += 1;
            items += 1;
        }
    }
    if g == 1 {
        return Ok(RecoveryReport {
            purity: 1.0,
            confusion,
            assignment: vec![0],
            items,
        });
    }
    let weights: Vec<Vec<f64>> = confusion
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let assignment = max_weight_assignment(&weights);
    let matched: usize = assignment.iter().enumerate().map(|(k, &g)| confusion[k][g]).sum();
    let purity = if items == 0 { 0.0 } else { matched as f64 / items as f64 };
    Ok(RecoveryReport {
        purity,
        confusion,
        assignment,
        items,
    })
}

/// Purity of [`interest_recovery`].
pub fn interest_recovery_score(
    params: &ModelParams,
    cfg: &ModelConfig,
    store: &InteractionStore,
    truth: &GroundTruth,
) -> Result<f64> {
    interest_recovery(params, cfg, store, truth).map(|r| r.purity)
}

/// Mean squared distance of item embeddings to their pool centroid,
/// averaged over pools, counting only items that occur in some sequence.
pub fn within_pool_variance(params: &ModelParams, store: &InteractionStore, truth: &GroundTruth) -> Result<f64> {
    let mut seen = vec![false; store.num_items()];
    for u in store.users() {
        for &i in store.sequence(u) {
            seen[i.index()] = true;
        }
    }
    let d = params.embedding_dim();
    let mut total = 0.0;
    let mut pools = 0;
    for pool in &truth.pools {
        let members: Vec<&[f64]> = pool
            .iter()
            .filter(|i| seen[i.index()])
            .map(|&i| params.item_embedding(i))
            .collect::<Result<_>>()?;
        if members.len() < 2 {
            continue;
        }
        let mut mean = vec![0.0; d];
        for e in &members {
            for (m, x) in mean.iter_mut().zip(e.iter()) {
                *m += x / members.len() as f64;
            }
        }
        let spread: f64 = members
            .iter()
            .map(|e| e.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
            .sum::<f64>()
            / members.len() as f64;
        total += spread;
        pools += 1;
    }
    Ok(if pools == 0 { 0.0 } else { total / pools as f64 })
}

/// Pool frequencies of one user's sequence.
pub fn pool_frequencies(store: &InteractionStore, truth: &GroundTruth, user: UserId) -> Vec<f64> {
    let mut counts = vec![0.0; truth.num_interests];
    let seq = store.sequence(user);
    for &i in seq {
        if let Some(p) = truth.item_pool[i.index()] {
            counts[p] += 1.0;
        }
    }
    counts.iter().map(|c| c / seq.len() as f64).collect()
}
