//! Pairwise (BPR) training with mini-batch Adam, validation-driven early
//! stopping and a resumable fitting state.
//!
//! All randomness in an epoch comes from a stream derived from
//! `(seed, epoch)`, so the fitting state needs no RNG snapshot: resuming
//! at epoch `e` replays exactly what an uninterrupted run would have drawn.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{build_training_set, InteractionStore, Split, TrainingTriplet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalOptions, MetricsReport};
use crate::model::{trace_score, trace_user, ModelConfig, ModelParams};
use crate::numerics::{neg_log_sigmoid, AdamConfig, DenseMatrix, GradTape, NodeId, OptimizerState};

const EPOCH_TAG: u64 = 0xE90C;
/// Triplets traced on one tape; bounds tape memory at large `d'`.
const TAPE_CHUNK: usize = 64;

/// `-ln sigmoid(pos - neg)`.
pub fn bpr_loss(rating_pos: f64, rating_neg: f64) -> f64 {
    neg_log_sigmoid(rating_pos - rating_neg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Evaluations without a strict NDCG@10 improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            batch_size: 256,
            max_epochs: 200,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            patience: 10,
            eval_every: 1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            problems.push("patience must be at least 1".into());
        }
        if self.eval_every == 0 {
            problems.push("eval_every must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                problems.push(format!("{name} must lie in (0, 1), got {beta}"));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            problems.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    pub fn validation_options(&self) -> EvalOptions {
        EvalOptions::new(Split::Valid, self.seed)
    }
}

/// The RNG for one epoch's shuffle and negatives.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, &[EPOCH_TAG, epoch as u64]))
}

/// Every training triplet with fresh negatives, shuffled.
pub fn epoch_triplets(store: &InteractionStore, seed: u64, epoch: usize) -> Result<Vec<TrainingTriplet>> {
    let mut rng = epoch_rng(seed, epoch);
    let mut triplets = build_training_set(store, &mut rng)?;
    triplets.shuffle(&mut rng);
    Ok(triplets)
}

/// `bpr_loss` of one triplet, sharing one user pass between both items.
pub fn trace_triplet_loss(
    tape: &mut GradTape<'_>,
    store: &InteractionStore,
    cfg: &ModelConfig,
    triplet: &TrainingTriplet,
) -> Result<NodeId> {
    let user = trace_user(tape, cfg, triplet.prefix(store))?;
    let e_u = user.aggregator.user_embedding;
    let pos = trace_score(tape, e_u, triplet.positive)?;
    let neg = trace_score(tape, e_u, triplet.negative)?;
    let neg = tape.scale(neg, -1.0);
    let margin = tape.add(pos, neg)?;
    Ok(tape.neg_log_sigmoid(margin))
}

/// Per-triplet losses and the gradient of their mean.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub losses: Vec<f64>,
    pub grads: Vec<DenseMatrix>,
}

impl BatchGradients {
    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }
}

pub fn batch_gradients(
    params: &ModelParams,
    store: &InteractionStore,
    cfg: &ModelConfig,
    batch: &[TrainingTriplet],
) -> Result<BatchGradients> {
    let inv = 1.0 / batch.len() as f64;
    let mut losses = Vec::with_capacity(batch.len());
    let mut total: Option<Vec<DenseMatrix>> = None;
    for chunk in batch.chunks(TAPE_CHUNK) {
        let mut tape = GradTape::new(params.buffers());
        let mut sum: Option<NodeId> = None;
        for t in chunk {
            let loss = trace_triplet_loss(&mut tape, store, cfg, t)?;
            losses.push(tape.scalar(loss));
            sum = Some(match sum {
                None => loss,
                Some(s) => tape.add(s, loss)?,
            });
        }
        let Some(sum) = sum else { continue };
        let scaled = tape.scale(sum, inv);
        let grads = tape.backward(scaled)?;
        match total.as_mut() {
            None => total = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_assign(g)?;
                }
            }
        }
    }
    let grads = match total {
        Some(g) => g,
        None => params.buffers().iter().map(|b| DenseMatrix::zeros(b.rows(), b.cols())).collect(),
    };
    Ok(BatchGradients { losses, grads })
}

/// Mean loss over `triplets` without touching the parameters.
pub fn mean_loss(
    params: &ModelParams,
    store: &InteractionStore,
    cfg: &ModelConfig,
    triplets: &[TrainingTriplet],
) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut total = 0.0;
    for chunk in triplets.chunks(TAPE_CHUNK) {
        let mut tape = GradTape::new(params.buffers());
        for t in chunk {
            let loss = trace_triplet_loss(&mut tape, store, cfg, t)?;
            total += tape.scalar(loss);
        }
    }
    Ok(total / triplets.len() as f64)
}

fn batch_dump(batch: &[TrainingTriplet], losses: &[f64]) -> String {
    let mut out = String::new();
    for (t, loss) in batch.iter().zip(losses) {
        let _ = write!(
            out,
            "[user {} prefix_len {} positive {} negative {} loss {}] ",
            t.user.index(),
            t.prefix_len,
            t.positive.index(),
            t.negative.index(),
            loss
        );
    }
    out.trim_end().into()
}

/// One pass over freshly sampled, shuffled triplets with an Adam step per
/// mini-batch. Returns the mean loss over all triplets, each measured
/// before the step of its batch.
pub fn train_epoch(
    store: &InteractionStore,
    params: &mut ModelParams,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    optimizer: &mut OptimizerState,
    epoch: usize,
) -> Result<f64> {
    let triplets = epoch_triplets(store, tcfg.seed, epoch)?;
    if triplets.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut total = 0.0;
    for (b, batch) in triplets.chunks(tcfg.batch_size).enumerate() {
        let step = batch_gradients(params, store, cfg, batch)?;
        let loss = step.mean_loss();
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: b,
                detail: batch_dump(batch, &step.losses),
            });
        }
        total += step.losses.iter().sum::<f64>();
        optimizer.apply(params.buffers_mut(), &step.grads)?;
    }
    Ok(total / triplets.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub loss: f64,
    /// Validation Recall@{5,10,20}, when this epoch was evaluated.
    pub recall: Option<[f64; 3]>,
    pub ndcg: Option<[f64; 3]>,
    /// Wall time since the run started; zero without a clock.
    pub seconds: f64,
}

impl LogRow {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &LogRow) -> bool {
        let bits = |v: &Option<[f64; 3]>| v.map(|a| a.map(f64::to_bits));
        self.epoch == other.epoch
            && self.loss.to_bits() == other.loss.to_bits()
            && bits(&self.recall) == bits(&other.recall)
            && bits(&self.ndcg) == bits(&other.ndcg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Completed epochs; epoch 0 is the untrained baseline.
    pub epoch: usize,
    pub best_metric: f64,
    pub best_epoch: usize,
    pub since_best: usize,
    pub evaluations: usize,
    pub optimizer: OptimizerState,
    /// Base of every per-epoch stream.
    pub seed: u64,
    pub finished: bool,
}

/// Everything needed to continue a run bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct FitState {
    pub params: ModelParams,
    pub best_params: ModelParams,
    pub state: TrainState,
    pub log: Vec<LogRow>,
}

/// Hooks into [`fit_with`]: a clock, the validation evaluator (so callers
/// can parallelize it) and a per-epoch callback for checkpointing.
pub trait FitObserver {
    fn elapsed_seconds(&mut self) -> f64 {
        0.0
    }

    fn evaluate(
        &mut self,
        store: &InteractionStore,
        params: &ModelParams,
        cfg: &ModelConfig,
        opts: &EvalOptions,
    ) -> Result<MetricsReport> {
        evaluate(store, params, cfg, opts)
    }

    fn after_epoch(&mut self, _state: &FitState) -> Result<()> {
        Ok(())
    }
}

/// No clock, sequential evaluation, no callbacks.
pub struct Quiet;

impl FitObserver for Quiet {}

impl FitState {
    /// Initializes parameters and records the epoch-0 baseline: the loss of
    /// the epoch-0 triplets and validation metrics, with no updates.
    pub fn start(
        store: &InteractionStore,
        cfg: &ModelConfig,
        tcfg: &TrainConfig,
        obs: &mut dyn FitObserver,
    ) -> Result<Self> {
        check_configs(cfg, tcfg)?;
        let params = ModelParams::init(cfg, store.num_items(), tcfg.seed)?;
        let optimizer = OptimizerState::new(tcfg.adam(), params.buffers());
        let loss = mean_loss(&params, store, cfg, &epoch_triplets(store, tcfg.seed, 0)?)?;
        let report = obs.evaluate(store, &params, cfg, &tcfg.validation_options())?;
        let mut fit = FitState {
            best_params: params.clone(),
            params,
            state: TrainState {
                epoch: 0,
                best_metric: report.selection_metric(),
                best_epoch: 0,
                since_best: 0,
                evaluations: 1,
                optimizer,
                seed: tcfg.seed,
                finished: tcfg.max_epochs == 0,
            },
            log: Vec::new(),
        };
        fit.log.push(LogRow {
            epoch: 0,
            loss,
            recall: Some(report.recall),
            ndcg: Some(report.ndcg),
            seconds: obs.elapsed_seconds(),
        });
        obs.after_epoch(&fit)?;
        Ok(fit)
    }

    pub fn is_finished(&self) -> bool {
        self.state.finished
    }

    /// Trains one epoch, evaluates if due, and updates the stopping state.
    pub fn step(
        &mut self,
        store: &InteractionStore,
        cfg: &ModelConfig,
        tcfg: &TrainConfig,
        obs: &mut dyn FitObserver,
    ) -> Result<()> {
        if self.state.finished {
            return Ok(());
        }
        let epoch = self.state.epoch + 1;
        let loss = train_epoch(store, &mut self.params, cfg, tcfg, &mut self.state.optimizer, epoch)?;
        self.state.epoch = epoch;
        let mut row = LogRow {
            epoch,
            loss,
            recall: None,
            ndcg: None,
            seconds: 0.0,
        };
        if epoch % tcfg.eval_every == 0 || epoch == tcfg.max_epochs {
            let report = obs.evaluate(store, &self.params, cfg, &tcfg.validation_options())?;
            self.state.evaluations += 1;
            let metric = report.selection_metric();
            if metric > self.state.best_metric {
                self.state.best_metric = metric;
                self.state.best_epoch = epoch;
                self.state.since_best = 0;
                self.best_params = self.params.clone();
            } else {
                self.state.since_best += 1;
            }
            row.recall = Some(report.recall);
            row.ndcg = Some(report.ndcg);
        }
        row.seconds = obs.elapsed_seconds();
        self.log.push(row);
        if epoch >= tcfg.max_epochs || self.state.since_best >= tcfg.patience {
            self.state.finished = true;
        }
        obs.after_epoch(self)
    }
}

fn check_configs(cfg: &ModelConfig, tcfg: &TrainConfig) -> Result<()> {
    let mut problems = Vec::new();
    for r in [cfg.validate(), tcfg.validate()] {
        if let Err(Error::InvalidConfig(p)) = r {
            problems.extend(p);
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(problems))
    }
}

/// Trains until patience runs out or `max_epochs` is reached.
pub fn fit(store: &InteractionStore, cfg: &ModelConfig, tcfg: &TrainConfig) -> Result<FitState> {
    fit_with(store, cfg, tcfg, &mut Quiet)
}

pub fn fit_with(
    store: &InteractionStore,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    obs: &mut dyn FitObserver,
) -> Result<FitState> {
    let state = FitState::start(store, cfg, tcfg, obs)?;
    resume_with(state, store, cfg, tcfg, obs)
}

/// Continues a saved run.
pub fn resume_with(
    mut state: FitState,
    store: &InteractionStore,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    obs: &mut dyn FitObserver,
) -> Result<FitState> {
    check_configs(cfg, tcfg)?;
    if state.state.seed != tcfg.seed {
        return Err(Error::InvalidConfig(alloc::vec![format!(
            "checkpoint was trained with seed {} but the config says {}",
            state.state.seed, tcfg.seed
        )]));
    }
    // the epoch limit may have been raised since the checkpoint was written
    if state.state.epoch < tcfg.max_epochs && state.state.since_best < tcfg.patience {
        state.state.finished = false;
    }
    while !state.is_finished() {
        state.step(store, cfg, tcfg, obs)?;
    }
    Ok(state)
}
