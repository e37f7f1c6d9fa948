use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::config::ModelConfig;
use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Names every learnable buffer. The discriminant is the buffer's index in
/// [`ModelParams::buffers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamId {
    ItemEmbeddings,
    PositionalEmbeddings,
    ExtractorPrompts,
    AggregatorPrompts,
    ExtractorHidden,
    ExtractorOut,
    AggregatorHidden,
    AggregatorOut,
    MlpHidden,
    MlpHiddenBias,
    MlpOut,
    MlpOutBias,
}

impl ParamId {
    pub const ALL: [ParamId; 12] = [
        ParamId::ItemEmbeddings,
        ParamId::PositionalEmbeddings,
        ParamId::ExtractorPrompts,
        ParamId::AggregatorPrompts,
        ParamId::ExtractorHidden,
        ParamId::ExtractorOut,
        ParamId::AggregatorHidden,
        ParamId::AggregatorOut,
        ParamId::MlpHidden,
        ParamId::MlpHiddenBias,
        ParamId::MlpOut,
        ParamId::MlpOutBias,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamId::ItemEmbeddings => "item_embeddings",
            ParamId::PositionalEmbeddings => "positional_embeddings",
            ParamId::ExtractorPrompts => "extractor_prompts",
            ParamId::AggregatorPrompts => "aggregator_prompts",
            ParamId::ExtractorHidden => "extractor_hidden",
            ParamId::ExtractorOut => "extractor_out",
            ParamId::AggregatorHidden => "aggregator_hidden",
            ParamId::AggregatorOut => "aggregator_out",
            ParamId::MlpHidden => "mlp_hidden",
            ParamId::MlpHiddenBias => "mlp_hidden_bias",
            ParamId::MlpOut => "mlp_out",
            ParamId::MlpOutBias => "mlp_out_bias",
        }
    }

    pub fn from_name(name: &str) -> Option<ParamId> {
        ParamId::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Shape of this buffer for a catalog of `num_items` items.
    pub fn shape(self, cfg: &ModelConfig, num_items: usize) -> (usize, usize) {
        let d = cfg.embedding_dim;
        let h = cfg.hidden_dim;
        let k = cfg.num_interests;
        match self {
            ParamId::ItemEmbeddings => (num_items, d),
            ParamId::PositionalEmbeddings => (cfg.seq_len, d),
            ParamId::ExtractorPrompts | ParamId::AggregatorPrompts => (cfg.prompts(), d),
            ParamId::ExtractorHidden | ParamId::AggregatorHidden | ParamId::MlpHidden => (h, d),
            ParamId::ExtractorOut | ParamId::MlpOut => (k, h),
            ParamId::AggregatorOut => (1, h),
            ParamId::MlpHiddenBias => (h, 1),
            ParamId::MlpOutBias => (k, 1),
        }
    }

    fn init(self) -> Init {
        match self {
            ParamId::ItemEmbeddings
            | ParamId::PositionalEmbeddings
            | ParamId::ExtractorPrompts
            | ParamId::AggregatorPrompts => Init::Embedding,
            ParamId::MlpHiddenBias | ParamId::MlpOutBias => Init::Zero,
            _ => Init::Glorot,
        }
    }
}

enum Init {
    /// Zero-mean normal with standard deviation `1/sqrt(d)`.
    Embedding,
    /// Uniform on `±sqrt(6 / (fan_in + fan_out))`.
    Glorot,
    Zero,
}

/// Every learnable buffer of the network, indexed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    buffers: Vec<DenseMatrix>,
}

impl ModelParams {
    /// Seeded random initialization. Buffers are drawn in [`ParamId::ALL`]
    /// order from one stream, so a given `(cfg, num_items, seed)` always
    /// produces the same parameters.
    pub fn init(cfg: &ModelConfig, num_items: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, &[0x1417]));
        let embed = Normal::new(0.0, 1.0 / libm::sqrt(cfg.embedding_dim as f64))
            .map_err(|e| Error::InvalidConfig(alloc::vec![format!("{e}")]))?;
        let buffers = ParamId::ALL
            .iter()
            .map(|&id| {
                let (rows, cols) = id.shape(cfg, num_items);
                let mut m = DenseMatrix::zeros(rows, cols);
                match id.init() {
                    Init::Embedding => m.data_mut().iter_mut().for_each(|v| *v = embed.sample(&mut rng)),
                    Init::Glorot => {
                        let bound = libm::sqrt(6.0 / (rows + cols) as f64);
                        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                        m.data_mut().iter_mut().for_each(|v| *v = dist.sample(&mut rng));
                    }
                    Init::Zero => {}
                }
                m
            })
            .collect();
        Ok(Self { buffers })
    }

    /// Wraps loaded buffers after checking every shape against `cfg`.
    pub fn from_buffers(cfg: &ModelConfig, buffers: Vec<DenseMatrix>) -> Result<Self> {
        if buffers.len() != ParamId::ALL.len() {
            return Err(Error::InvalidConfig(alloc::vec![format!(
                "expected {} parameter buffers, got {}",
                ParamId::ALL.len(),
                buffers.len()
            )]));
        }
        let num_items = buffers[ParamId::ItemEmbeddings.index()].rows();
        for id in ParamId::ALL {
            let expected = id.shape(cfg, num_items);
            let got = buffers[id.index()].shape();
            if expected != got {
                return Err(Error::ShapeMismatch {
                    op: id.name(),
                    left: expected,
                    right: got,
                });
            }
            if !buffers[id.index()].is_finite() {
                return Err(Error::NonFinite(id.name()));
            }
        }
        Ok(Self { buffers })
    }

    /// All-zero parameters of the right shapes.
    pub fn zeros(cfg: &ModelConfig, num_items: usize) -> Self {
        let buffers = ParamId::ALL
            .iter()
            .map(|id| {
                let (r, c) = id.shape(cfg, num_items);
                DenseMatrix::zeros(r, c)
            })
            .collect();
        Self { buffers }
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &DenseMatrix {
        &self.buffers[id.index()]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.buffers[id.index()]
    }

    pub fn buffers(&self) -> &[DenseMatrix] {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.buffers
    }

    pub fn into_buffers(self) -> Vec<DenseMatrix> {
        self.buffers
    }

    pub fn num_items(&self) -> usize {
        self.get(ParamId::ItemEmbeddings).rows()
    }

    pub fn embedding_dim(&self) -> usize {
        self.get(ParamId::ItemEmbeddings).cols()
    }

    pub fn item_embedding(&self, item: ItemId) -> Result<&[f64]> {
        let table = self.get(ParamId::ItemEmbeddings);
        if item.index() >= table.rows() {
            return Err(Error::UnknownItem {
                item: item.index(),
                num_items: table.rows(),
            });
        }
        Ok(table.row(item.index()))
    }

    pub fn is_finite(&self) -> bool {
        self.buffers.iter().all(DenseMatrix::is_finite)
    }

    pub fn num_scalars(&self) -> usize {
        self.buffers.iter().map(DenseMatrix::len).sum()
    }
}
