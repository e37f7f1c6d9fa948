use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq, Default)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows. Panics on ragged input; meant
    /// for literals in tests and fixtures.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    /// An `n x 1` column vector.
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column_values(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self += other`, shapes must agree.
    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        check_same("add_assign", self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

fn check_same(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Counts multiply-adds performed by the product kernels.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub multiply_adds: u64,
}

/// `a * b`.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, k, m) = (a.rows, a.cols, b.cols);
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let out_row = &mut out.data[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a.data[i * k + p];
            let b_row = &b.data[p * m..(p + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aip * bv;
            }
        }
    }
    Ok(out)
}

/// `aᵀ * b` without materializing the transpose.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows != b.rows {
        return Err(Error::ShapeMismatch {
            op: "matmul_tn",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (k, n, m) = (a.rows, a.cols, b.cols);
    let mut out = DenseMatrix::zeros(n, m);
    for p in 0..k {
        let a_row = &a.data[p * n..(p + 1) * n];
        let b_row = &b.data[p * m..(p + 1) * m];
        for (i, &aval) in a_row.iter().enumerate() {
            let out_row = &mut out.data[i * m..(i + 1) * m];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aval * bv;
            }
        }
    }
    Ok(out)
}

/// `a * bᵀ` without materializing the transpose.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.cols {
        return Err(Error::ShapeMismatch {
            op: "matmul_nt",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let (n, k, m) = (a.rows, a.cols, b.rows);
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let a_row = &a.data[i * k..(i + 1) * k];
        for j in 0..m {
            let b_row = &b.data[j * k..(j + 1) * k];
            out.data[i * m + j] = dot_slices(a_row, b_row);
        }
    }
    Ok(out)
}

pub fn transpose(a: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.cols, a.rows);
    for r in 0..a.rows {
        for c in 0..a.cols {
            out.data[c * a.rows + r] = a.data[r * a.cols + c];
        }
    }
    out
}

pub fn add(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_same("add", a, b)?;
    let mut out = a.clone();
    for (o, v) in out.data.iter_mut().zip(&b.data) {
        *o += v;
    }
    Ok(out)
}

pub fn scale(a: &DenseMatrix, factor: f64) -> DenseMatrix {
    a.map(|v| v * factor)
}

pub fn tanh(a: &DenseMatrix) -> DenseMatrix {
    a.map(libm::tanh)
}

pub fn square(a: &DenseMatrix) -> DenseMatrix {
    a.map(|v| v * v)
}

/// Elementwise square root with the argument clamped at zero first, so
/// rounding noise like `-1e-17` maps to `0` instead of NaN.
pub fn sqrt_clamped(a: &DenseMatrix) -> DenseMatrix {
    a.map(|v| libm::sqrt(v.max(0.0)))
}

/// Softmax down each column (over rows), with the column max subtracted
/// before exponentiating.
pub fn column_softmax(m: &DenseMatrix) -> DenseMatrix {
    let mut out = m.clone();
    if m.rows == 0 {
        return out;
    }
    for c in 0..m.cols {
        let mut max = f64::NEG_INFINITY;
        for r in 0..m.rows {
            max = max.max(m.data[r * m.cols + c]);
        }
        let mut sum = 0.0;
        for r in 0..m.rows {
            let e = libm::exp(m.data[r * m.cols + c] - max);
            out.data[r * m.cols + c] = e;
            sum += e;
        }
        for r in 0..m.rows {
            out.data[r * m.cols + c] /= sum;
        }
    }
    out
}

/// Inner product of two matrices viewed as flat vectors of equal length.
pub fn dot(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "dot",
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(dot_slices(&a.data, &b.data))
}

#[inline]
pub fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stacks `top` above `bottom`.
pub fn concat_rows(top: &DenseMatrix, bottom: &DenseMatrix) -> Result<DenseMatrix> {
    if top.cols != bottom.cols && top.rows != 0 && bottom.rows != 0 {
        return Err(Error::ShapeMismatch {
            op: "concat_rows",
            left: top.shape(),
            right: bottom.shape(),
        });
    }
    let cols = if top.rows == 0 { bottom.cols } else { top.cols };
    let mut data = Vec::with_capacity(top.len() + bottom.len());
    data.extend_from_slice(&top.data);
    data.extend_from_slice(&bottom.data);
    Ok(DenseMatrix {
        rows: top.rows + bottom.rows,
        cols,
        data,
    })
}

pub fn slice_rows(a: &DenseMatrix, start: usize, len: usize) -> DenseMatrix {
    DenseMatrix {
        rows: len,
        cols: a.cols,
        data: a.data[start * a.cols..(start + len) * a.cols].to_vec(),
    }
}

/// `log(1 + exp(-x))` = `-log(sigmoid(x))`, stable for either sign of `x`.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        libm::log1p(libm::exp(-x))
    } else {
        -x + libm::log1p(libm::exp(x))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect();
        DenseMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn naive_product(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(matmul(&DenseMatrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn matmul_row_by_column() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0]]);
        let b = DenseMatrix::from_rows(&[[3.0], [4.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), DenseMatrix::from_rows(&[[11.0]]));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(3, 4, &mut rng);
        let b = random(4, 2, &mut rng);
        let got = matmul(&a, &b).unwrap();
        assert!(got.max_abs_diff(&naive_product(&a, &b)) < 1e-14);
        let tn = matmul_tn(&transpose(&a), &b).unwrap();
        assert!(tn.max_abs_diff(&got) < 1e-14);
        let nt = matmul_nt(&a, &transpose(&b)).unwrap();
        assert!(nt.max_abs_diff(&got) < 1e-14);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let err = matmul(&DenseMatrix::zeros(2, 3), &DenseMatrix::zeros(2, 3)).unwrap_err();
        assert_eq!(
            err,
            Error::ShapeMismatch {
                op: "matmul",
                left: (2, 3),
                right: (2, 3)
            }
        );
        let msg = alloc::format!("{err}");
        assert!(msg.contains("(2, 3) vs (2, 3)"), "{msg}");
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let s = column_softmax(&DenseMatrix::zeros(4, 2));
        assert!(s.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn softmax_of_logs() {
        let s = column_softmax(&DenseMatrix::column(&[libm::log(1.0), libm::log(3.0)]));
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(1, 0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random(5, 3, &mut rng);
        let s = column_softmax(&m);
        for c in 0..3 {
            let denom: f64 = (0..5).map(|r| libm::exp(m.get(r, c))).sum();
            for r in 0..5 {
                assert!((s.get(r, c) - libm::exp(m.get(r, c)) / denom).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let s = column_softmax(&DenseMatrix::column(&[1000.0, 999.0, -1e308]));
        assert!(s.is_finite());
        assert!((s.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_clamps_negative_rounding() {
        let m = sqrt_clamped(&DenseMatrix::column(&[-1e-16, 4.0]));
        assert_eq!(m.data(), &[0.0, 2.0]);
    }

    #[test]
    fn neg_log_sigmoid_tails() {
        assert!((neg_log_sigmoid(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(neg_log_sigmoid(800.0) < 1e-300);
        assert!((neg_log_sigmoid(-800.0) - 800.0).abs() < 1e-12);
        assert!((sigmoid(-800.0)).is_finite());
    }

    #[test]
    fn kernels_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(7, 9, &mut rng);
        let b = random(9, 4, &mut rng);
        let first = column_softmax(&matmul(&a, &b).unwrap());
        let second = column_softmax(&matmul(&a, &b).unwrap());
        let bits = |m: &DenseMatrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&first), bits(&second));
    }

    proptest! {
        #[test]
        fn softmax_columns_sum_to_one(
            rows in 1usize..12,
            cols in 1usize..6,
            seed in any::<u64>(),
            spread in 0.0f64..500.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random(rows, cols, &mut rng).map(|v| v * spread);
            let s = column_softmax(&m);
            for c in 0..cols {
                let total: f64 = s.column_values(c).iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-9);
                prop_assert!(s.column_values(c).iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}
