//! The network, traced onto a [`GradTape`].
//!
//! Shapes, with `P = N_p + M` rows of prompt-augmented input:
//!
//! ```text
//! H_F, H_G          P x d     prompts stacked above the positional window
//! A_F               P x K     softmax down each column of (W2_F tanh(W1_F H_Fᵀ))ᵀ
//! centrality        d x K     H_Fᵀ A_F
//! dispersion        d x K     sqrt((H_F²)ᵀ A_F - centrality²)
//! V                 d x K     centrality + λ dispersion
//! a_G               P x 1     softmax of (W2_G tanh(W1_G H_Gᵀ))ᵀ
//! summary v         d x 1     H_Gᵀ a_G
//! z                 K x 1     W2_M tanh(W1_M v + b1) + b2
//! user embedding    d x 1     V z
//! ```
//!
//! Centrality and dispersion are computed on rows shifted by the first input
//! row and shifted back afterwards. That is the same function (softmax
//! columns sum to one, and variance ignores shifts) but identical rows then
//! give a dispersion of exactly zero instead of rounding noise.

use alloc::vec;
use alloc::vec::Vec;

use super::config::ModelConfig;
use super::params::{ModelParams, ParamId};
use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::numerics::{dot_slices, matmul, DenseMatrix, GradTape, NodeId};

/// `H_F` and `H_G`, each `(N_p + M) x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptedInputs {
    pub extractor: DenseMatrix,
    pub aggregator: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionTrace {
    /// `A_F`, `(N_p + M) x K`, columns sum to one.
    pub attention: DenseMatrix,
    pub centrality: DenseMatrix,
    pub dispersion: DenseMatrix,
    /// `V`, `d x K`.
    pub interests: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationTrace {
    /// `a_G`, one weight per input row.
    pub attention: Vec<f64>,
    pub summary: Vec<f64>,
    /// Raw interest weights `z`; not normalized.
    pub weights: Vec<f64>,
    pub user_embedding: Vec<f64>,
}

/// Node handles for one traced user.
#[derive(Debug, Clone, Copy)]
pub struct UserNodes {
    pub extractor_input: NodeId,
    pub aggregator_input: NodeId,
    pub extractor: ExtractorNodes,
    pub aggregator: AggregatorNodes,
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractorNodes {
    pub attention: NodeId,
    pub centrality: NodeId,
    pub dispersion: NodeId,
    pub interests: NodeId,
}

#[derive(Debug, Clone, Copy)]
pub struct AggregatorNodes {
    pub attention: NodeId,
    pub summary: NodeId,
    pub weights: NodeId,
    pub user_embedding: NodeId,
}

const fn p(id: ParamId) -> usize {
    id as usize
}

/// The last `seq_len` items of `prefix`, left-padded with `None`.
pub fn window(prefix: &[ItemId], seq_len: usize) -> Vec<Option<usize>> {
    let keep = prefix.len().min(seq_len);
    let mut rows = vec![None; seq_len - keep];
    rows.extend(prefix[prefix.len() - keep..].iter().map(|i| Some(i.index())));
    rows
}

/// Traces `H_F` and `H_G` for a prefix. An empty prefix is a window of pure
/// padding (positional embeddings only); the public [`build_inputs`] rejects
/// it, but training uses it for each user's first interaction.
pub fn trace_inputs(
    tape: &mut GradTape<'_>,
    cfg: &ModelConfig,
    prefix: &[ItemId],
) -> Result<(NodeId, NodeId)> {
    let rows = window(prefix, cfg.seq_len);
    let items = tape.gather_rows(p(ParamId::ItemEmbeddings), &rows)?;
    let positions = tape.param(p(ParamId::PositionalEmbeddings));
    let window = tape.add(items, positions)?;
    if cfg.prompts() == 0 {
        return Ok((window, window));
    }
    let pf = tape.param(p(ParamId::ExtractorPrompts));
    let pg = tape.param(p(ParamId::AggregatorPrompts));
    Ok((tape.concat_rows(pf, window)?, tape.concat_rows(pg, window)?))
}

/// Self-attention over the rows of `H_F` into `K` interests, each described
/// by its centrality and dispersion.
pub fn trace_extractor(
    tape: &mut GradTape<'_>,
    cfg: &ModelConfig,
    h_f: NodeId,
) -> Result<ExtractorNodes> {
    let (rows, dim) = tape.value(h_f).shape();
    if dim != cfg.embedding_dim {
        return Err(Error::ShapeMismatch {
            op: "extractor input",
            left: (rows, dim),
            right: (rows, cfg.embedding_dim),
        });
    }
    let k = cfg.num_interests;

    let h_t = tape.transpose(h_f);
    let w1 = tape.param(p(ParamId::ExtractorHidden));
    let hidden = tape.matmul(w1, h_t)?;
    let hidden = tape.tanh(hidden);
    let w2 = tape.param(p(ParamId::ExtractorOut));
    let logits = tape.matmul(w2, hidden)?;
    let logits = tape.transpose(logits);
    let attention = tape.column_softmax(logits);

    // Shift every row by the first one.
    let reference = tape.slice_rows(h_f, 0, 1)?;
    let ones_rows = tape.input(DenseMatrix::filled(rows, 1, 1.0));
    let reference_rows = tape.matmul(ones_rows, reference)?;
    let neg_reference_rows = tape.scale(reference_rows, -1.0);
    let shifted = tape.add(h_f, neg_reference_rows)?;
    let shifted_t = tape.transpose(shifted);

    let shifted_mean = tape.matmul(shifted_t, attention)?;
    let reference_t = tape.transpose(reference);
    let ones_cols = tape.input(DenseMatrix::filled(1, k, 1.0));
    let reference_cols = tape.matmul(reference_t, ones_cols)?;
    let centrality = tape.add(reference_cols, shifted_mean)?;

    let shifted_sq_t = tape.square(shifted_t);
    let second_moment = tape.matmul(shifted_sq_t, attention)?;
    let mean_sq = tape.square(shifted_mean);
    let neg_mean_sq = tape.scale(mean_sq, -1.0);
    let variance = tape.add(second_moment, neg_mean_sq)?;
    let dispersion = tape.sqrt(variance);

    let weighted = tape.scale(dispersion, cfg.lambda());
    let interests = tape.add(centrality, weighted)?;
    Ok(ExtractorNodes {
        attention,
        centrality,
        dispersion,
        interests,
    })
}

/// Attention pooling of `H_G`, the two-layer weight MLP, and the weighted
/// fusion of the interest columns.
pub fn trace_aggregator(
    tape: &mut GradTape<'_>,
    cfg: &ModelConfig,
    h_g: NodeId,
    interests: NodeId,
) -> Result<AggregatorNodes> {
    let (rows, dim) = tape.value(h_g).shape();
    if dim != cfg.embedding_dim {
        return Err(Error::ShapeMismatch {
            op: "aggregator input",
            left: (rows, dim),
            right: (rows, cfg.embedding_dim),
        });
    }
    let h_t = tape.transpose(h_g);
    let w1 = tape.param(p(ParamId::AggregatorHidden));
    let hidden = tape.matmul(w1, h_t)?;
    let hidden = tape.tanh(hidden);
    let w2 = tape.param(p(ParamId::AggregatorOut));
    let logits = tape.matmul(w2, hidden)?;
    let logits = tape.transpose(logits);
    let attention = tape.column_softmax(logits);
    let summary = tape.matmul(h_t, attention)?;

    let m1 = tape.param(p(ParamId::MlpHidden));
    let b1 = tape.param(p(ParamId::MlpHiddenBias));
    let m2 = tape.param(p(ParamId::MlpOut));
    let b2 = tape.param(p(ParamId::MlpOutBias));
    let layer = tape.matmul(m1, summary)?;
    let layer = tape.add(layer, b1)?;
    let layer = tape.tanh(layer);
    let weights = tape.matmul(m2, layer)?;
    let weights = tape.add(weights, b2)?;

    let user_embedding = tape.matmul(interests, weights)?;
    Ok(AggregatorNodes {
        attention,
        summary,
        weights,
        user_embedding,
    })
}

pub fn trace_user(tape: &mut GradTape<'_>, cfg: &ModelConfig, prefix: &[ItemId]) -> Result<UserNodes> {
    let (h_f, h_g) = trace_inputs(tape, cfg, prefix)?;
    let extractor = trace_extractor(tape, cfg, h_f)?;
    let aggregator = trace_aggregator(tape, cfg, h_g, extractor.interests)?;
    Ok(UserNodes {
        extractor_input: h_f,
        aggregator_input: h_g,
        extractor,
        aggregator,
    })
}

/// `e_uᵀ e_i` as a `1x1` node.
pub fn trace_score(tape: &mut GradTape<'_>, user_embedding: NodeId, item: ItemId) -> Result<NodeId> {
    let row = tape.gather_rows(p(ParamId::ItemEmbeddings), &[Some(item.index())])?;
    tape.dot(user_embedding, row)
}

fn check_items(items: &[ItemId], params: &ModelParams) -> Result<()> {
    let n = params.num_items();
    match items.iter().find(|i| i.index() >= n) {
        Some(bad) => Err(Error::UnknownItem {
            item: bad.index(),
            num_items: n,
        }),
        None => Ok(()),
    }
}

/// Prompt-augmented inputs for a non-empty interaction sequence.
pub fn build_inputs(seq: &[ItemId], params: &ModelParams, cfg: &ModelConfig) -> Result<PromptedInputs> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_items(seq, params)?;
    let mut tape = GradTape::new(params.buffers());
    let (h_f, h_g) = trace_inputs(&mut tape, cfg, seq)?;
    Ok(PromptedInputs {
        extractor: tape.value(h_f).clone(),
        aggregator: tape.value(h_g).clone(),
    })
}

fn extraction_trace(tape: &GradTape<'_>, nodes: &ExtractorNodes) -> ExtractionTrace {
    ExtractionTrace {
        attention: tape.value(nodes.attention).clone(),
        centrality: tape.value(nodes.centrality).clone(),
        dispersion: tape.value(nodes.dispersion).clone(),
        interests: tape.value(nodes.interests).clone(),
    }
}

fn aggregation_trace(tape: &GradTape<'_>, nodes: &AggregatorNodes) -> AggregationTrace {
    AggregationTrace {
        attention: tape.value(nodes.attention).data().to_vec(),
        summary: tape.value(nodes.summary).data().to_vec(),
        weights: tape.value(nodes.weights).data().to_vec(),
        user_embedding: tape.value(nodes.user_embedding).data().to_vec(),
    }
}

fn check_input_rows(m: &DenseMatrix, cfg: &ModelConfig) -> Result<()> {
    if m.shape() != (cfg.input_rows(), cfg.embedding_dim) {
        return Err(Error::ShapeMismatch {
            op: "prompted inputs",
            left: m.shape(),
            right: (cfg.input_rows(), cfg.embedding_dim),
        });
    }
    Ok(())
}

pub fn extract_interests(
    inputs: &PromptedInputs,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ExtractionTrace> {
    check_input_rows(&inputs.extractor, cfg)?;
    let mut tape = GradTape::new(params.buffers());
    let h_f = tape.input(inputs.extractor.clone());
    let nodes = trace_extractor(&mut tape, cfg, h_f)?;
    Ok(extraction_trace(&tape, &nodes))
}

pub fn aggregate(
    inputs: &PromptedInputs,
    trace: &ExtractionTrace,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<AggregationTrace> {
    check_input_rows(&inputs.aggregator, cfg)?;
    let mut tape = GradTape::new(params.buffers());
    let h_g = tape.input(inputs.aggregator.clone());
    let v = tape.input(trace.interests.clone());
    let nodes = trace_aggregator(&mut tape, cfg, h_g, v)?;
    Ok(aggregation_trace(&tape, &nodes))
}

/// `V z` for externally supplied weights.
pub fn fuse_interests(interests: &DenseMatrix, weights: &[f64]) -> Result<Vec<f64>> {
    Ok(matmul(interests, &DenseMatrix::column(weights))?.into_vec())
}

pub fn score(user_embedding: &[f64], item: ItemId, params: &ModelParams) -> Result<f64> {
    let e = params.item_embedding(item)?;
    if e.len() != user_embedding.len() {
        return Err(Error::ShapeMismatch {
            op: "score",
            left: (user_embedding.len(), 1),
            right: (e.len(), 1),
        });
    }
    Ok(dot_slices(user_embedding, e))
}

/// Both traces for a prefix (empty prefixes allowed, see [`trace_inputs`]).
pub fn user_state(
    prefix: &[ItemId],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(ExtractionTrace, AggregationTrace)> {
    check_items(prefix, params)?;
    let mut tape = GradTape::new(params.buffers());
    let nodes = trace_user(&mut tape, cfg, prefix)?;
    Ok((
        extraction_trace(&tape, &nodes.extractor),
        aggregation_trace(&tape, &nodes.aggregator),
    ))
}

/// The fused user embedding for a prefix.
pub fn user_embedding(prefix: &[ItemId], params: &ModelParams, cfg: &ModelConfig) -> Result<Vec<f64>> {
    check_items(prefix, params)?;
    let mut tape = GradTape::new(params.buffers());
    let nodes = trace_user(&mut tape, cfg, prefix)?;
    Ok(tape.value(nodes.aggregator.user_embedding).data().to_vec())
}

/// Rating of `target` given `seq`, with both intermediate traces.
pub fn forward(
    seq: &[ItemId],
    target: ItemId,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(f64, ExtractionTrace, AggregationTrace)> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    check_items(seq, params)?;
    let mut tape = GradTape::new(params.buffers());
    let nodes = trace_user(&mut tape, cfg, seq)?;
    let rating = trace_score(&mut tape, nodes.aggregator.user_embedding, target)?;
    Ok((
        tape.scalar(rating),
        extraction_trace(&tape, &nodes.extractor),
        aggregation_trace(&tape, &nodes.aggregator),
    ))
}

/// Multiply-adds spent by one forward pass (user representation plus one
/// rating).
pub fn forward_multiply_adds(
    seq: &[ItemId],
    target: ItemId,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<u64> {
    let mut tape = GradTape::new(params.buffers());
    let nodes = trace_user(&mut tape, cfg, seq)?;
    trace_score(&mut tape, nodes.aggregator.user_embedding, target)?;
    Ok(tape.multiply_adds())
}
