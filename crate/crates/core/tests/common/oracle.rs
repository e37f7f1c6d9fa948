//! Straight-line reimplementation of the network with nested `Vec`s and
//! explicit loops. Shares nothing with the library beyond reading parameter
//! buffers, so agreement is evidence for both.

#![allow(dead_code)]

use pomrec_core::model::ParamId;
use pomrec_core::{ItemId, ModelConfig, ModelParams};

pub type Mat = Vec<Vec<f64>>;

fn buffer(params: &ModelParams, id: ParamId) -> Mat {
    let m = params.get(id);
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Rows of `H_F` and `H_G` for a (possibly empty) prefix.
pub fn inputs(seq: &[ItemId], params: &ModelParams, cfg: &ModelConfig) -> (Mat, Mat) {
    let d = cfg.embedding_dim;
    let m = cfg.seq_len;
    let items = buffer(params, ParamId::ItemEmbeddings);
    let pos = buffer(params, ParamId::PositionalEmbeddings);
    let start = seq.len().saturating_sub(m);
    let recent = &seq[start..];
    let pad = m - recent.len();
    let mut window = Vec::new();
    for slot in 0..m {
        let mut row = vec![0.0; d];
        if slot >= pad {
            row.clone_from(&items[recent[slot - pad].index()]);
        }
        for c in 0..d {
            row[c] += pos[slot][c];
        }
        window.push(row);
    }
    let n_p = cfg.prompts();
    let mut hf = buffer(params, ParamId::ExtractorPrompts)[..n_p].to_vec();
    let mut hg = buffer(params, ParamId::AggregatorPrompts)[..n_p].to_vec();
    hf.extend(window.iter().cloned());
    hg.extend(window);
    (hf, hg)
}

fn tanh_layer(w: &Mat, x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().tanh())
        .collect()
}

fn linear(w: &Mat, x: &[f64]) -> Vec<f64> {
    w.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub struct Extraction {
    /// `attention[row][k]`
    pub attention: Mat,
    /// `[dim][k]`
    pub centrality: Mat,
    pub dispersion: Mat,
    pub interests: Mat,
}

/// Attention per interest column, then weighted mean and weighted standard
/// deviation (two-pass) of the rows under each column.
pub fn extract(h: &Mat, params: &ModelParams, cfg: &ModelConfig) -> Extraction {
    let k = cfg.num_interests;
    let d = cfg.embedding_dim;
    let p = h.len();
    let w1 = buffer(params, ParamId::ExtractorHidden);
    let w2 = buffer(params, ParamId::ExtractorOut);
    let logits: Mat = h.iter().map(|row| linear(&w2, &tanh_layer(&w1, row))).collect();
    let mut attention = vec![vec![0.0; k]; p];
    for c in 0..k {
        let max = (0..p).map(|r| logits[r][c]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..p).map(|r| (logits[r][c] - max).exp()).sum();
        for r in 0..p {
            attention[r][c] = (logits[r][c] - max).exp() / z;
        }
    }
    let lambda = cfg.lambda();
    let mut centrality = vec![vec![0.0; k]; d];
    let mut dispersion = vec![vec![0.0; k]; d];
    let mut interests = vec![vec![0.0; k]; d];
    for c in 0..k {
        for j in 0..d {
            let mean: f64 = (0..p).map(|r| attention[r][c] * h[r][j]).sum();
            let var: f64 = (0..p).map(|r| attention[r][c] * (h[r][j] - mean).powi(2)).sum();
            centrality[j][c] = mean;
            dispersion[j][c] = var.max(0.0).sqrt();
            interests[j][c] = mean + lambda * dispersion[j][c];
        }
    }
    Extraction {
        attention,
        centrality,
        dispersion,
        interests,
    }
}

pub struct Aggregation {
    pub attention: Vec<f64>,
    pub summary: Vec<f64>,
    pub weights: Vec<f64>,
    pub user_embedding: Vec<f64>,
}

pub fn aggregate(h: &Mat, interests: &Mat, params: &ModelParams, cfg: &ModelConfig) -> Aggregation {
    let d = cfg.embedding_dim;
    let k = cfg.num_interests;
    let w1 = buffer(params, ParamId::AggregatorHidden);
    let w2 = buffer(params, ParamId::AggregatorOut);
    let logits: Vec<f64> = h.iter().map(|row| linear(&w2, &tanh_layer(&w1, row))[0]).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let attention: Vec<f64> = logits.iter().map(|l| (l - max).exp() / z).collect();
    let summary: Vec<f64> = (0..d).map(|j| (0..h.len()).map(|r| attention[r] * h[r][j]).sum()).collect();

    let m1 = buffer(params, ParamId::MlpHidden);
    let b1 = buffer(params, ParamId::MlpHiddenBias);
    let m2 = buffer(params, ParamId::MlpOut);
    let b2 = buffer(params, ParamId::MlpOutBias);
    let hidden: Vec<f64> = linear(&m1, &summary)
        .iter()
        .enumerate()
        .map(|(i, x)| (x + b1[i][0]).tanh())
        .collect();
    let weights: Vec<f64> = linear(&m2, &hidden).iter().enumerate().map(|(i, x)| x + b2[i][0]).collect();
    let user_embedding = (0..d).map(|j| (0..k).map(|c| interests[j][c] * weights[c]).sum()).collect();
    Aggregation {
        attention,
        summary,
        weights,
        user_embedding,
    }
}

pub fn user_embedding(seq: &[ItemId], params: &ModelParams, cfg: &ModelConfig) -> Vec<f64> {
    let (hf, hg) = inputs(seq, params, cfg);
    let ex = extract(&hf, params, cfg);
    aggregate(&hg, &ex.interests, params, cfg).user_embedding
}

pub fn rating(seq: &[ItemId], target: ItemId, params: &ModelParams, cfg: &ModelConfig) -> f64 {
    let e_u = user_embedding(seq, params, cfg);
    let item = params.get(ParamId::ItemEmbeddings).row(target.index());
    e_u.iter().zip(item).map(|(a, b)| a * b).sum()
}

pub fn bpr(pos: f64, neg: f64) -> f64 {
    let x = pos - neg;
    (1.0 + (-x).exp()).ln()
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `m[r][c]` of a row-major library matrix as nested rows.
pub fn rows_of(m: &pomrec_core::DenseMatrix) -> Mat {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}
