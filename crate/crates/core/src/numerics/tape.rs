//! Reverse-mode gradients over matrix-valued nodes.
//!
//! A [`GradTape`] borrows the parameter buffers for the duration of one
//! trace. Parameter nodes read straight from those buffers, so tracing a
//! forward pass never copies the embedding table. Nodes are appended in
//! evaluation order, which makes the vector itself a topological order:
//! [`GradTape::backward`] walks it once from the end.

use alloc::vec;
use alloc::vec::Vec;

use super::matrix::{self, DenseMatrix, OpCounter};
use crate::error::{Error, Result};

/// Handle to a node on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(usize),
    /// Rows of a parameter buffer; `None` is an all-zero padding row.
    GatherRows {
        param: usize,
        rows: Vec<Option<usize>>,
    },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Tanh(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    ColumnSoftmax(NodeId),
    Transpose(NodeId),
    Scale(NodeId, f64),
    ConcatRows(NodeId, NodeId),
    SliceRows {
        src: NodeId,
        start: usize,
    },
    Dot(NodeId, NodeId),
    NegLogSigmoid(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    // Empty for `Op::Param`; the value lives in the borrowed buffer.
    value: DenseMatrix,
}

pub struct GradTape<'p> {
    params: &'p [DenseMatrix],
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
    counter: OpCounter,
}

impl<'p> GradTape<'p> {
    pub fn new(params: &'p [DenseMatrix]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            counter: OpCounter::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Multiply-adds spent in `matmul` and `dot` nodes so far.
    pub fn multiply_adds(&self) -> u64 {
        self.counter.multiply_adds
    }

    pub fn value(&self, id: NodeId) -> &DenseMatrix {
        match self.nodes[id.0].op {
            Op::Param(p) => &self.params[p],
            _ => &self.nodes[id.0].value,
        }
    }

    /// Value of a `1x1` node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).data()[0]
    }

    fn push(&mut self, op: Op, value: DenseMatrix) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// A constant; gradients are not reported for it.
    pub fn input(&mut self, value: DenseMatrix) -> NodeId {
        self.push(Op::Input, value)
    }

    /// The node for parameter buffer `index`. Repeated calls return the same
    /// node so gradients from several uses accumulate in one place.
    pub fn param(&mut self, index: usize) -> NodeId {
        if let Some(id) = self.param_nodes[index] {
            return id;
        }
        let id = self.push(Op::Param(index), DenseMatrix::default());
        self.param_nodes[index] = Some(id);
        id
    }

    /// Selects rows of a parameter buffer, `None` giving a zero row.
    pub fn gather_rows(&mut self, param: usize, rows: &[Option<usize>]) -> Result<NodeId> {
        let table = &self.params[param];
        let mut value = DenseMatrix::zeros(rows.len(), table.cols());
        for (i, row) in rows.iter().enumerate() {
            if let Some(r) = *row {
                if r >= table.rows() {
                    return Err(Error::UnknownItem {
                        item: r,
                        num_items: table.rows(),
                    });
                }
                value.row_mut(i).copy_from_slice(table.row(r));
            }
        }
        Ok(self.push(
            Op::GatherRows {
                param,
                rows: rows.to_vec(),
            },
            value,
        ))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let value = matrix::matmul(va, vb)?;
        self.counter.multiply_adds += (va.rows() * va.cols() * vb.cols()) as u64;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = matrix::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = matrix::tanh(self.value(a));
        self.push(Op::Tanh(a), value)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let value = matrix::square(self.value(a));
        self.push(Op::Square(a), value)
    }

    /// Square root with the argument clamped at zero; the derivative is
    /// taken as zero wherever the output is zero.
    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        let value = matrix::sqrt_clamped(self.value(a));
        self.push(Op::Sqrt(a), value)
    }

    pub fn column_softmax(&mut self, a: NodeId) -> NodeId {
        let value = matrix::column_softmax(self.value(a));
        self.push(Op::ColumnSoftmax(a), value)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = matrix::transpose(self.value(a));
        self.push(Op::Transpose(a), value)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = matrix::scale(self.value(a), factor);
        self.push(Op::Scale(a, factor), value)
    }

    pub fn concat_rows(&mut self, top: NodeId, bottom: NodeId) -> Result<NodeId> {
        let value = matrix::concat_rows(self.value(top), self.value(bottom))?;
        Ok(self.push(Op::ConcatRows(top, bottom), value))
    }

    pub fn slice_rows(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(src);
        if start + len > v.rows() {
            return Err(Error::ShapeMismatch {
                op: "slice_rows",
                left: v.shape(),
                right: (start + len, v.cols()),
            });
        }
        let value = matrix::slice_rows(v, start, len);
        Ok(self.push(Op::SliceRows { src, start }, value))
    }

    /// Flat inner product, producing a `1x1` node.
    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let d = matrix::dot(self.value(a), self.value(b))?;
        self.counter.multiply_adds += self.value(a).len() as u64;
        Ok(self.push(Op::Dot(a, b), DenseMatrix::from_rows(&[[d]])))
    }

    /// Elementwise `-log(sigmoid(x))`.
    pub fn neg_log_sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(matrix::neg_log_sigmoid);
        self.push(Op::NegLogSigmoid(a), value)
    }

    /// Back-propagates from a scalar node. Returns one gradient per parameter
    /// buffer, shaped like the buffer; buffers off every path to `loss` get
    /// zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<DenseMatrix>> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NotScalar(shape));
        }
        let mut grads: Vec<DenseMatrix> = self
            .params
            .iter()
            .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
            .collect();
        let mut adjoints: Vec<Option<DenseMatrix>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(DenseMatrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = adjoints[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let out = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Param(p) => grads[*p].add_assign(&g)?,
                Op::GatherRows { param, rows } => {
                    let target = &mut grads[*param];
                    for (i, row) in rows.iter().enumerate() {
                        if let Some(r) = *row {
                            for (t, v) in target.row_mut(r).iter_mut().zip(g.row(i)) {
                                *t += v;
                            }
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let da = matrix::matmul_nt(&g, self.value(*b))?;
                    let db = matrix::matmul_tn(self.value(*a), &g)?;
                    accumulate(&mut adjoints, *a, da)?;
                    accumulate(&mut adjoints, *b, db)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut adjoints, *a, g.clone())?;
                    accumulate(&mut adjoints, *b, g)?;
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    for (dv, y) in d.data_mut().iter_mut().zip(out.data()) {
                        *dv *= 1.0 - y * y;
                    }
                    accumulate(&mut adjoints, *a, d)?;
                }
                Op::Square(a) => {
                    let mut d = g;
                    for (dv, x) in d.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *dv *= 2.0 * x;
                    }
                    accumulate(&mut adjoints, *a, d)?;
                }
                Op::Sqrt(a) => {
                    let mut d = g;
                    for (dv, y) in d.data_mut().iter_mut().zip(out.data()) {
                        *dv = if *y > 0.0 { *dv / (2.0 * y) } else { 0.0 };
                    }
                    accumulate(&mut adjoints, *a, d)?;
                }
                Op::ColumnSoftmax(a) => {
                    let (rows, cols) = out.shape();
                    let mut d = g;
                    for c in 0..cols {
                        let mut inner = 0.0;
                        for r in 0..rows {
                            inner += d.get(r, c) * out.get(r, c);
                        }
                        for r in 0..rows {
                            let y = out.get(r, c);
                            d.set(r, c, y * (d.get(r, c) - inner));
                        }
                    }
                    accumulate(&mut adjoints, *a, d)?;
                }
                Op::Transpose(a) => accumulate(&mut adjoints, *a, matrix::transpose(&g))?,
                Op::Scale(a, f) => accumulate(&mut adjoints, *a, matrix::scale(&g, *f))?,
                Op::ConcatRows(top, bottom) => {
                    let split = self.value(*top).rows();
                    let total = g.rows();
                    accumulate(&mut adjoints, *top, matrix::slice_rows(&g, 0, split))?;
                    accumulate(
                        &mut adjoints,
                        *bottom,
                        matrix::slice_rows(&g, split, total - split),
                    )?;
                }
                Op::SliceRows { src, start } => {
                    let source = self.value(*src);
                    let mut d = DenseMatrix::zeros(source.rows(), source.cols());
                    for r in 0..g.rows() {
                        d.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut adjoints, *src, d)?;
                }
                Op::Dot(a, b) => {
                    let s = g.data()[0];
                    let va = self.value(*a);
                    let vb = self.value(*b);
                    let da = reshape_scaled(vb, va.shape(), s);
                    let db = reshape_scaled(va, vb.shape(), s);
                    accumulate(&mut adjoints, *a, da)?;
                    accumulate(&mut adjoints, *b, db)?;
                }
                Op::NegLogSigmoid(a) => {
                    let mut d = g;
                    for (dv, x) in d.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *dv *= -matrix::sigmoid(-x);
                    }
                    accumulate(&mut adjoints, *a, d)?;
                }
            }
        }
        Ok(grads)
    }
}

fn reshape_scaled(src: &DenseMatrix, shape: (usize, usize), factor: f64) -> DenseMatrix {
    let data = src.data().iter().map(|v| v * factor).collect();
    DenseMatrix::from_vec(shape.0, shape.1, data).expect("dot operands have equal length")
}

fn accumulate(adjoints: &mut [Option<DenseMatrix>], id: NodeId, g: DenseMatrix) -> Result<()> {
    match &mut adjoints[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}
