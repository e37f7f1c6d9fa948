#![allow(dead_code)]

pub mod gradcheck;
pub mod oracle;
pub mod recovery;

use pomrec_core::data::TrainingTriplet;
use pomrec_core::model::ParamId;
use pomrec_core::{InteractionStore, ItemId, ModelConfig, ModelParams, UserId};

pub fn ids(v: &[u32]) -> Vec<ItemId> {
    v.iter().map(|&i| ItemId(i)).collect()
}

/// The d=3, K=2, M=2, N_p=1 instance over six items used for gradient checks.
pub fn gradient_instance() -> (InteractionStore, ModelConfig, ModelParams, Vec<TrainingTriplet>) {
    let store = InteractionStore::from_sequences(6, vec![ids(&[0, 1, 2, 3]), ids(&[4, 2, 5, 1, 0])]).unwrap();
    let cfg = ModelConfig {
        num_interests: 2,
        num_prompts: 1,
        ..ModelConfig::with_dims(3, 2)
    };
    let mut params = ModelParams::init(&cfg, 6, 17).unwrap();
    // non-zero biases so their gradients are exercised away from the origin
    for (i, v) in params.get_mut(ParamId::MlpHiddenBias).data_mut().iter_mut().enumerate() {
        *v = 0.05 * (i as f64 - 5.0);
    }
    params.get_mut(ParamId::MlpOutBias).data_mut().copy_from_slice(&[0.3, -0.2]);
    let t = |user: usize, prefix_len: usize, negative: u32| TrainingTriplet {
        user: UserId::new(user),
        prefix_len,
        positive: store.sequence(UserId::new(user))[prefix_len],
        negative: ItemId(negative),
    };
    let triplets = vec![t(0, 0, 4), t(0, 1, 5), t(1, 1, 3), t(1, 2, 3)];
    (store, cfg, params, triplets)
}
