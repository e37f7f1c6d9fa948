//! JSON checkpoints with exact hexadecimal floats.
//!
//! A model checkpoint holds the configuration, the catalog size, the seed and
//! every parameter buffer with its shape. A run state additionally holds the
//! optimizer moments, the stopping state, the best parameters and the log,
//! which is everything [`pomrec_core::training::resume_with`] needs to
//! continue bit-identically.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use pomrec_core::model::ParamId;
use pomrec_core::numerics::{AdamConfig, OptimizerState};
use pomrec_core::training::{FitState, LogRow, TrainState};
use pomrec_core::{DenseMatrix, ModelConfig, ModelParams, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::hexfloat;

const MODEL_FORMAT: &str = "pomrec-model";
const STATE_FORMAT: &str = "pomrec-run-state";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BufferDoc {
    name: String,
    rows: usize,
    cols: usize,
    #[serde(with = "hexfloat::vec")]
    data: Vec<f64>,
}

fn buffer_docs(names: &[&str], buffers: &[DenseMatrix]) -> Vec<BufferDoc> {
    names
        .iter()
        .zip(buffers)
        .map(|(name, b)| BufferDoc {
            name: name.to_string(),
            rows: b.rows(),
            cols: b.cols(),
            data: b.data().to_vec(),
        })
        .collect()
}

fn param_names() -> Vec<&'static str> {
    ParamId::ALL.iter().map(|p| p.name()).collect()
}

fn matrices(docs: Vec<BufferDoc>, names: &[&str]) -> Result<Vec<DenseMatrix>> {
    ensure!(
        docs.len() == names.len(),
        "checkpoint has {} buffers, expected {}",
        docs.len(),
        names.len()
    );
    docs.into_iter()
        .zip(names)
        .map(|(doc, name)| {
            ensure!(doc.name == *name, "buffer {:?} found where {name:?} was expected", doc.name);
            DenseMatrix::from_vec(doc.rows, doc.cols, doc.data).with_context(|| format!("buffer {name}"))
        })
        .collect()
}

fn load_params(cfg: &ModelConfig, docs: Vec<BufferDoc>) -> Result<ModelParams> {
    let buffers = matrices(docs, &param_names())?;
    Ok(ModelParams::from_buffers(cfg, buffers)?)
}

/// Short content hash of the parameter bits.
pub fn params_id(params: &ModelParams) -> String {
    let mut hasher = Sha256::new();
    for b in params.buffers() {
        hasher.update((b.rows() as u64).to_le_bytes());
        hasher.update((b.cols() as u64).to_le_bytes());
        for x in b.data() {
            hasher.update(x.to_bits().to_le_bytes());
        }
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: ModelConfig,
    pub num_items: usize,
    pub seed: u64,
    /// Epoch the parameters were taken from.
    pub epoch: usize,
    pub params: ModelParams,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    id: String,
    config: ModelConfig,
    num_items: usize,
    seed: u64,
    epoch: usize,
    buffers: Vec<BufferDoc>,
}

impl ModelCheckpoint {
    pub fn id(&self) -> String {
        params_id(&self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format: MODEL_FORMAT.into(),
            version: VERSION,
            id: self.id(),
            config: self.config.clone(),
            num_items: self.num_items,
            seed: self.seed,
            epoch: self.epoch,
            buffers: buffer_docs(&param_names(), self.params.buffers()),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text).context("malformed model checkpoint")?;
        if doc.format != MODEL_FORMAT {
            bail!("not a model checkpoint (format {:?})", doc.format);
        }
        ensure!(doc.version == VERSION, "unsupported checkpoint version {}", doc.version);
        let params = load_params(&doc.config, doc.buffers)?;
        ensure!(
            params.num_items() == doc.num_items,
            "item table has {} rows but num_items is {}",
            params.num_items(),
            doc.num_items
        );
        let ckpt = ModelCheckpoint {
            config: doc.config,
            num_items: doc.num_items,
            seed: doc.seed,
            epoch: doc.epoch,
            params,
        };
        ensure!(ckpt.id() == doc.id, "checkpoint id {} does not match its contents", doc.id);
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }
}

/// Writes through a sibling temp file so an interrupted run never leaves a
/// truncated checkpoint behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct AdamDoc {
    #[serde(with = "hexfloat::single")]
    learning_rate: f64,
    #[serde(with = "hexfloat::single")]
    beta1: f64,
    #[serde(with = "hexfloat::single")]
    beta2: f64,
    #[serde(with = "hexfloat::single")]
    epsilon: f64,
    step: u64,
    first_moment: Vec<BufferDoc>,
    second_moment: Vec<BufferDoc>,
}

#[derive(Serialize, Deserialize)]
struct LogDoc {
    epoch: usize,
    #[serde(with = "hexfloat::single")]
    loss: f64,
    #[serde(with = "hexfloat::option_triple")]
    recall: Option<[f64; 3]>,
    #[serde(with = "hexfloat::option_triple")]
    ndcg: Option<[f64; 3]>,
    #[serde(with = "hexfloat::single")]
    seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct StateDoc {
    format: String,
    version: u32,
    config: ModelConfig,
    train: TrainConfig,
    num_items: usize,
    epoch: usize,
    #[serde(with = "hexfloat::single")]
    best_metric: f64,
    best_epoch: usize,
    since_best: usize,
    evaluations: usize,
    seed: u64,
    finished: bool,
    optimizer: AdamDoc,
    params: Vec<BufferDoc>,
    best_params: Vec<BufferDoc>,
    log: Vec<LogDoc>,
}

/// A resumable snapshot of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub config: ModelConfig,
    pub train: TrainConfig,
    pub fit: FitState,
}

impl RunState {
    pub fn to_json(&self) -> Result<String> {
        let names = param_names();
        let s = &self.fit.state;
        let opt = &s.optimizer;
        let doc = StateDoc {
            format: STATE_FORMAT.into(),
            version: VERSION,
            config: self.config.clone(),
            train: self.train.clone(),
            num_items: self.fit.params.num_items(),
            epoch: s.epoch,
            best_metric: s.best_metric,
            best_epoch: s.best_epoch,
            since_best: s.since_best,
            evaluations: s.evaluations,
            seed: s.seed,
            finished: s.finished,
            optimizer: AdamDoc {
                learning_rate: opt.config.learning_rate,
                beta1: opt.config.beta1,
                beta2: opt.config.beta2,
                epsilon: opt.config.epsilon,
                step: opt.step,
                first_moment: buffer_docs(&names, &opt.first_moment),
                second_moment: buffer_docs(&names, &opt.second_moment),
            },
            params: buffer_docs(&names, self.fit.params.buffers()),
            best_params: buffer_docs(&names, self.fit.best_params.buffers()),
            log: self
                .fit
                .log
                .iter()
                .map(|r| LogDoc {
                    epoch: r.epoch,
                    loss: r.loss,
                    recall: r.recall,
                    ndcg: r.ndcg,
                    seconds: r.seconds,
                })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StateDoc = serde_json::from_str(text).context("malformed run state")?;
        if doc.format != STATE_FORMAT {
            bail!("not a run state (format {:?})", doc.format);
        }
        ensure!(doc.version == VERSION, "unsupported run state version {}", doc.version);
        let names = param_names();
        let params = load_params(&doc.config, doc.params)?;
        let best_params = load_params(&doc.config, doc.best_params)?;
        ensure!(params.num_items() == doc.num_items, "item table size disagrees with num_items");
        let optimizer = OptimizerState {
            config: AdamConfig {
                learning_rate: doc.optimizer.learning_rate,
                beta1: doc.optimizer.beta1,
                beta2: doc.optimizer.beta2,
                epsilon: doc.optimizer.epsilon,
            },
            step: doc.optimizer.step,
            first_moment: matrices(doc.optimizer.first_moment, &names)?,
            second_moment: matrices(doc.optimizer.second_moment, &names)?,
        };
        Ok(RunState {
            config: doc.config,
            train: doc.train,
            fit: FitState {
                params,
                best_params,
                state: TrainState {
                    epoch: doc.epoch,
                    best_metric: doc.best_metric,
                    best_epoch: doc.best_epoch,
                    since_best: doc.since_best,
                    evaluations: doc.evaluations,
                    optimizer,
                    seed: doc.seed,
                    finished: doc.finished,
                },
                log: doc
                    .log
                    .into_iter()
                    .map(|r| LogRow {
                        epoch: r.epoch,
                        loss: r.loss,
                        recall: r.recall,
                        ndcg: r.ndcg,
                        seconds: r.seconds,
                    })
                    .collect(),
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("loading {}", path.display()))
    }

    /// The best-validation parameters as a standalone model checkpoint.
    pub fn best_model(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            config: self.config.clone(),
            num_items: self.fit.best_params.num_items(),
            seed: self.train.seed,
            epoch: self.fit.state.best_epoch,
            params: self.fit.best_params.clone(),
        }
    }
}
