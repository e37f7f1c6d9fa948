//! Independent purity computation and its permutation null.

use pomrec_core::model::user_state;
use pomrec_core::synth::{max_weight_assignment, SynthWorld};
use pomrec_core::{ModelConfig, ModelParams};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(item index, argmax interest)` for every item in every user's window.
pub fn assignments(params: &ModelParams, cfg: &ModelConfig, world: &SynthWorld) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in world.store.users() {
        let seq = world.store.sequence(u);
        let (trace, _) = user_state(seq, params, cfg).unwrap();
        let start = cfg.seq_len.saturating_sub(seq.len());
        let recent = &seq[seq.len().saturating_sub(cfg.seq_len)..];
        for (j, item) in recent.iter().enumerate() {
            let row = trace.attention.row(cfg.prompts() + start + j);
            let best = (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b });
            out.push((item.index(), best));
        }
    }
    out
}

pub fn purity(assigned: &[(usize, usize)], pool_of: &[usize], k: usize) -> f64 {
    let mut confusion = vec![vec![0.0; k]; k];
    for &(item, c) in assigned {
        confusion[c][pool_of[item]] += 1.0;
    }
    let matching = max_weight_assignment(&confusion);
    let hit: f64 = matching.iter().enumerate().map(|(c, &g)| confusion[c][g]).sum();
    hit / assigned.len() as f64
}

/// Mean and standard deviation of purity when item pool labels are
/// shuffled, keeping the assignments fixed.
pub fn permutation_null(assigned: &[(usize, usize)], pool_of: &[usize], k: usize, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let null: Vec<f64> = (0..draws)
        .map(|_| {
            let mut labels = pool_of.to_vec();
            labels.shuffle(&mut rng);
            purity(assigned, &labels, k)
        })
        .collect();
    let mean = null.iter().sum::<f64>() / draws as f64;
    let var = null.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    (mean, var.sqrt())
}

/// Pool of every item; panics on items outside all pools.
pub fn pool_labels(world: &SynthWorld) -> Vec<usize> {
    world.truth.item_pool.iter().map(|p| p.expect("every item is pooled")).collect()
}
