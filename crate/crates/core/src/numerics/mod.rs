//! Dense kernels, the gradient tape and the optimizer.

mod adam;
mod matrix;
mod tape;

pub use adam::{AdamConfig, OptimizerState};
pub use matrix::{
    add, column_softmax, concat_rows, dot, dot_slices, matmul, matmul_nt, matmul_tn,
    neg_log_sigmoid, scale, sigmoid, slice_rows, sqrt_clamped, square, tanh, transpose,
    DenseMatrix, OpCounter,
};
pub use tape::{GradTape, NodeId};
