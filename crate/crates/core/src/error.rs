use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix data has {len} values, expected {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },

    #[error("loss node must be 1x1, got {0:?}")]
    NotScalar((usize, usize)),

    #[error("unknown item id {item} (catalog has {num_items} items)")]
    UnknownItem { item: usize, num_items: usize },

    #[error("unknown user id {0}")]
    UnknownUser(String),

    #[error("empty interaction sequence")]
    EmptySequence,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("user {user} has interacted with every item; no negative can be sampled")]
    NoNegatives { user: usize },

    #[error("split is empty: no users to evaluate")]
    EmptySplit,

    #[error("{0}")]
    PoolSizing(String),

    #[error("interest count {interests} does not match planted interest count {planted}")]
    InterestMismatch { interests: usize, planted: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
}
