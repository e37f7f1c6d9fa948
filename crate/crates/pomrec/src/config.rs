//! Run configuration: defaults, then an optional JSON file, then flags.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pomrec_core::data::{FilterConfig, TextFormat, NUM_EVAL_NEGATIVES};
use pomrec_core::eval::CandidateMode;
use pomrec_core::{EvalOptions, ModelConfig, Split, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::UsageError;

/// Environment variable holding the default output root.
pub const OUT_DIR_ENV: &str = "POMREC_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub format: TextFormat,
    pub filter: FilterConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            format: TextFormat::movielens(),
            filter: FilterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub split: Split,
    /// Seed of the candidate sample; independent of the training seed.
    pub seed: u64,
    pub negatives: usize,
    pub full_catalog: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split: Split::Test,
            seed: 0,
            negatives: NUM_EVAL_NEGATIVES,
            full_catalog: false,
        }
    }
}

impl EvalConfig {
    pub fn options(&self, checkpoint_id: Option<String>) -> EvalOptions {
        EvalOptions {
            split: self.split,
            seed: self.seed,
            candidates: if self.full_catalog {
                CandidateMode::FullCatalog
            } else {
                CandidateMode::Sampled {
                    negatives: self.negatives,
                }
            },
            checkpoint_id,
        }
    }
}

/// Everything a command needs, written to `config.json` in the output
/// directory so the run can be repeated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
    /// Log wall time in the training log; off makes logs byte-identical.
    pub clock: bool,
    /// Flag overrides and variant adjustments, in the order applied.
    pub notes: Vec<String>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            eval: EvalConfig::default(),
            out_dir: default_out_dir(command),
            clock: true,
            notes: Vec::new(),
        }
    }

    /// Defaults overlaid with a (possibly partial) JSON document.
    pub fn from_file(command: &str, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let overlay: Value = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("config {} is not valid JSON: {e}", path.display())))?;
        let mut merged = serde_json::to_value(Self::new(command))?;
        merge(&mut merged, overlay);
        // the command always comes from the command line
        merged["command"] = Value::String(command.into());
        serde_json::from_value(merged)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    /// Applies a flag value, recording the override.
    pub fn set<T: PartialEq + Display>(&mut self, flag: &str, field: impl FnOnce(&mut Self) -> &mut T, value: Option<T>) {
        if let Some(value) = value {
            let slot = field(self);
            let note = format!("--{flag} = {value} (was {slot})");
            *slot = value;
            self.notes.push(note);
        }
    }

    /// Forces the variant's unused knobs off, noting each change.
    pub fn resolve_variant(&mut self) {
        let (resolved, notes) = self.model.resolved();
        self.model = resolved;
        self.notes.extend(notes);
    }

    /// Every problem with the model and training sections at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for r in [self.model.validate(), self.train.validate()] {
            if let Err(pomrec_core::Error::InvalidConfig(p)) = r {
                problems.extend(p);
            }
        }
        if !self.eval.full_catalog && self.eval.negatives == 0 {
            problems.push("eval.negatives must be at least 1".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(UsageError(format!("invalid configuration:\n  {}", problems.join("\n  "))).into())
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .path
            .as_deref()
            .ok_or_else(|| UsageError("a dataset is required (--data or data.path in --config)".into()).into())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

pub fn default_out_dir(command: &str) -> PathBuf {
    let root = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(command)
}

/// Recursive object merge; anything that is not an object on both sides is
/// replaced.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
