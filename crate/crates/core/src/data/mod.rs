//! Interaction data: parsing, leave-one-out splits, training triplets and
//! evaluation candidates.

mod sampling;
mod store;

pub use sampling::{
    build_training_set, full_catalog_candidates, sample_eval_candidates, sample_negative,
    sample_user_candidates, training_positions, EvalCandidates, TrainingTriplet,
    NUM_EVAL_NEGATIVES,
};
pub use store::{
    parse_interactions, FilterConfig, InteractionStore, ItemId, LoadReport, Split, TextFormat,
    UserId,
};
