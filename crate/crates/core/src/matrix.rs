//! Dense row-major matrices and the kernels the pruning pipeline is built on:
//! Gram matrices, products and fixed-order dot products.
//!
//! Every kernel sums each output element in a fixed order, so results are
//! bit-identical no matter how many threads rayon uses.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major `n_rows x n_cols` matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows.checked_mul(n_cols) != Some(values.len()) {
            return Err(Error::InvalidArgument(format!(
                "matrix of shape {n_rows}x{n_cols} needs {} values, got {}",
                n_rows.saturating_mul(n_cols),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {n_cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), n_cols, values)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.values[i * dim + i] = 1.0;
        }
        m
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_rows * n_cols);
        Self {
            n_rows,
            n_cols,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let width = self.n_cols.max(1);
        self.values.chunks_exact(width).take(self.n_rows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                out[j * self.n_rows + i] = self.values[i * self.n_cols + j];
            }
        }
        Self::from_parts(self.n_cols, self.n_rows, out)
    }

    /// The first `m` columns, as an `n_rows x m` matrix.
    pub fn leading_columns(&self, m: usize) -> DenseMatrix {
        assert!(m <= self.n_cols, "requested {m} of {} columns", self.n_cols);
        let mut out = Vec::with_capacity(self.n_rows * m);
        for row in self.rows() {
            out.extend_from_slice(&row[..m]);
        }
        Self::from_parts(self.n_rows, m, out)
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut out = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            out.extend_from_slice(self.row(i));
        }
        Self::from_parts(indices.len(), self.n_cols, out)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }
}

/// Square symmetric matrix. Symmetry is exact: construction replaces the
/// input with `(A + A^T) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn new(dim: usize, mut values: Vec<f64>) -> Result<Self> {
        if dim.checked_mul(dim) != Some(values.len()) {
            return Err(Error::InvalidArgument(format!(
                "symmetric matrix of dim {dim} needs {} values, got {}",
                dim.saturating_mul(dim),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (values[i * dim + j] + values[j * dim + i]);
                values[i * dim + j] = avg;
                values[j * dim + i] = avg;
            }
        }
        Ok(Self { dim, values })
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.n_rows() != m.n_cols() {
            return Err(Error::shape("symmetric", m.shape(), m.shape()));
        }
        Self::new(m.n_rows(), m.values().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_parts(self.dim, self.dim, self.values.clone())
    }
}

/// `D^T D`, the uncentered Gram matrix of the rows of `d`.
pub fn gram_matrix(d: &DenseMatrix) -> Result<SymmetricMatrix> {
    if d.n_rows() == 0 || d.n_cols() == 0 {
        return Err(Error::EmptyInput);
    }
    let dim = d.n_cols();
    // column-major copy so every entry is a contiguous dot product
    let cols = d.transpose();
    let n = d.n_rows();
    let upper: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            let ci = &cols.values()[i * n..(i + 1) * n];
            (i..dim)
                .map(|j| dot(ci, &cols.values()[j * n..(j + 1) * n]))
                .collect()
        })
        .collect();
    let mut values = vec![0.0; dim * dim];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            values[i * dim + j] = v;
            values[j * dim + i] = v;
        }
    }
    SymmetricMatrix::new(dim, values)
}

/// Matrix product `a * b`.
pub fn project(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_cols() != b.n_rows() {
        return Err(Error::shape("project", a.shape(), b.shape()));
    }
    let (n, m) = (a.n_rows(), b.n_cols());
    let mut out = vec![0.0; n * m];
    if m > 0 {
        out.par_chunks_mut(m).enumerate().for_each(|(i, out_row)| {
            for (l, &coef) in a.row(i).iter().enumerate() {
                for (o, &bv) in out_row.iter_mut().zip(b.row(l)) {
                    *o += coef * bv;
                }
            }
        });
    }
    DenseMatrix::new(n, m, out)
}

/// Dot product with four interleaved accumulators, combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}

/// Same accumulation order as [`dot`], with 32-bit storage widened on the fly.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] as f64 * b[i];
        acc[1] += a[i + 1] as f64 * b[i + 1];
        acc[2] += a[i + 2] as f64 * b[i + 2];
        acc[3] += a[i + 3] as f64 * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] as f64 * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail
}
