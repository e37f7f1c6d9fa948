//! Central finite differences against the tape's gradients of the mean
//! BPR loss.

#![allow(dead_code)]

use pomrec_core::data::TrainingTriplet;
use pomrec_core::model::ParamId;
use pomrec_core::training::{batch_gradients, mean_loss};
use pomrec_core::{InteractionStore, ModelConfig, ModelParams};

pub const STEP: f64 = 1e-5;

/// `(buffer name, ||analytic - numeric|| / max(||analytic||, ||numeric||))`
/// for every buffer with at least one entry.
pub fn relative_errors(
    params: &ModelParams,
    store: &InteractionStore,
    cfg: &ModelConfig,
    triplets: &[TrainingTriplet],
) -> Vec<(&'static str, f64)> {
    let analytic = batch_gradients(params, store, cfg, triplets).unwrap().grads;
    let mut out = Vec::new();
    for id in ParamId::ALL {
        let n = params.get(id).len();
        if n == 0 {
            continue;
        }
        let mut diff = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        for k in 0..n {
            let mut plus = params.clone();
            plus.get_mut(id).data_mut()[k] += STEP;
            let mut minus = params.clone();
            minus.get_mut(id).data_mut()[k] -= STEP;
            let numeric = (mean_loss(&plus, store, cfg, triplets).unwrap()
                - mean_loss(&minus, store, cfg, triplets).unwrap())
                / (2.0 * STEP);
            let a = analytic[id.index()].data()[k];
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
        let scale = norm_a.sqrt().max(norm_n.sqrt()).max(1e-12);
        out.push((id.name(), diff.sqrt() / scale));
    }
    out
}
