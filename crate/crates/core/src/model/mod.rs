//! The recommender network: configuration, parameters and forward graph.

mod config;
mod forward;
mod params;

pub use config::{ModelConfig, Variant};
pub use forward::{
    aggregate, build_inputs, extract_interests, forward, forward_multiply_adds, fuse_interests,
    score, trace_aggregator, trace_extractor, trace_inputs, trace_score, trace_user,
    user_embedding, user_state, window, AggregationTrace, AggregatorNodes, ExtractionTrace,
    ExtractorNodes, PromptedInputs, UserNodes,
};
pub use params::{ModelParams, ParamId};
