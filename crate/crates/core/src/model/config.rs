use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ablation variants. `Base` drops prompts and dispersion, `Prompt` keeps
/// only prompts, `Disp` keeps only dispersion, `Full` keeps both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Base,
    Prompt,
    Disp,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::Prompt, Variant::Disp, Variant::Full];

    pub fn uses_prompts(self) -> bool {
        matches!(self, Variant::Prompt | Variant::Full)
    }

    pub fn uses_dispersion(self) -> bool {
        matches!(self, Variant::Disp | Variant::Full)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Prompt => "prompt",
            Variant::Disp => "disp",
            Variant::Full => "full",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" => Ok(Variant::Base),
            "prompt" | "+prompt" => Ok(Variant::Prompt),
            "disp" | "+disp" | "dispersion" => Ok(Variant::Disp),
            "full" | "pomrec" => Ok(Variant::Full),
            other => Err(format!(
                "unknown variant `{other}` (expected base, prompt, disp or full)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `d`
    pub embedding_dim: usize,
    /// `M`, the number of most recent interactions in the window.
    pub seq_len: usize,
    /// `K`
    pub num_interests: usize,
    /// `N_p`, rows in each of the two prompt banks.
    pub num_prompts: usize,
    /// `d'`
    pub hidden_dim: usize,
    /// `λ`, the weight of dispersion in the interest embeddings.
    pub dispersion_weight: f64,
    pub mlp_layers: usize,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::with_dims(64, 20)
    }
}

impl ModelConfig {
    pub const MAX_INTERESTS: usize = 5;
    pub const MAX_PROMPTS: usize = 5;

    /// Defaults for the given `d` and `M`, with `d' = 4d`.
    pub fn with_dims(embedding_dim: usize, seq_len: usize) -> Self {
        Self {
            embedding_dim,
            seq_len,
            num_interests: 2,
            num_prompts: 2,
            hidden_dim: 4 * embedding_dim,
            dispersion_weight: 4.0,
            mlp_layers: 2,
            variant: Variant::Full,
        }
    }

    /// Prompt rows actually used once the variant is taken into account.
    pub fn prompts(&self) -> usize {
        if self.variant.uses_prompts() {
            self.num_prompts
        } else {
            0
        }
    }

    /// Dispersion weight actually used once the variant is taken into account.
    pub fn lambda(&self) -> f64 {
        if self.variant.uses_dispersion() {
            self.dispersion_weight
        } else {
            0.0
        }
    }

    /// Rows in the prompt-augmented input, `N_p + M`.
    pub fn input_rows(&self) -> usize {
        self.prompts() + self.seq_len
    }

    /// Collects every violated constraint rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.embedding_dim == 0 {
            problems.push("embedding_dim must be at least 1".to_string());
        }
        if self.seq_len == 0 {
            problems.push("seq_len must be at least 1".to_string());
        }
        if self.hidden_dim == 0 {
            problems.push("hidden_dim must be at least 1".to_string());
        }
        if !(1..=Self::MAX_INTERESTS).contains(&self.num_interests) {
            problems.push(format!(
                "num_interests must be in 1..={}, got {}",
                Self::MAX_INTERESTS,
                self.num_interests
            ));
        }
        if self.num_prompts > Self::MAX_PROMPTS {
            problems.push(format!(
                "num_prompts must be in 0..={}, got {}",
                Self::MAX_PROMPTS,
                self.num_prompts
            ));
        }
        if !(self.dispersion_weight >= 0.0 && self.dispersion_weight.is_finite()) {
            problems.push(format!(
                "dispersion_weight must be a finite non-negative number, got {}",
                self.dispersion_weight
            ));
        }
        if self.mlp_layers != 2 {
            problems.push(format!("mlp_layers is fixed at 2, got {}", self.mlp_layers));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }

    /// Rewrites `num_prompts` / `dispersion_weight` to what the variant
    /// actually uses, returning a note for every field that changed.
    pub fn resolved(&self) -> (ModelConfig, Vec<String>) {
        let mut cfg = self.clone();
        let mut notes = Vec::new();
        if !cfg.variant.uses_prompts() && cfg.num_prompts != 0 {
            notes.push(format!(
                "variant {}: num_prompts forced to 0 (was {})",
                cfg.variant, cfg.num_prompts
            ));
            cfg.num_prompts = 0;
        }
        if !cfg.variant.uses_dispersion() && cfg.dispersion_weight != 0.0 {
            notes.push(format!(
                "variant {}: dispersion_weight forced to 0 (was {})",
                cfg.variant, cfg.dispersion_weight
            ));
            cfg.dispersion_weight = 0.0;
        }
        (cfg, notes)
    }
}
