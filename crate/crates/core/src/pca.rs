//! Static dimension pruning.
//!
//! A [`PcaModel`] holds the eigendecomposition `D^T D = W diag(lambda) W^T`
//! of a document sample. Keeping the first `m` columns of `W` gives a
//! [`PrunedTransform`]: documents are stored as `D W_m` and queries are
//! mapped with `W_m^T q`, so scores become `(D W_m)(W_m^T q)`. With `m = d`
//! the basis is orthogonal and the scores equal `D q`.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::eigen::sym_eigendecomposition;
use crate::error::{Error, Result};
use crate::matrix::{dot, gram_matrix, project, DenseMatrix};

/// Tolerance on `|v_i . v_j - delta_ij|` accepted for a basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    eigenvalues: Vec<f64>,
    basis: DenseMatrix,
    fitted_on: u64,
    source_tag: String,
}

impl PcaModel {
    /// Validates the model invariants: square basis with orthonormal columns,
    /// one non-negative eigenvalue per column in non-increasing order.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        basis: DenseMatrix,
        fitted_on: u64,
        source_tag: impl Into<String>,
    ) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        if basis.shape() != (d, d) {
            return Err(Error::shape("pca model", (d, 1), basis.shape()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if eigenvalues.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("negative eigenvalue".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "eigenvalues are not sorted in non-increasing order".into(),
            ));
        }
        if let Some((i, j, ip)) = orthonormality_violation(&basis) {
            return Err(Error::InvalidArgument(format!(
                "basis columns {i} and {j} are not orthonormal (inner product {ip})"
            )));
        }
        Ok(Self {
            eigenvalues,
            basis,
            fitted_on,
            source_tag: source_tag.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `d x d`, columns are principal directions.
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    pub fn fitted_on(&self) -> u64 {
        self.fitted_on
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    /// Fraction of eigenvalue mass kept by the first `m` components, for
    /// `m = 1..=d`. Non-decreasing and ending at exactly 1.
    pub fn retained_variance_curve(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        let mut acc = 0.0;
        self.eigenvalues
            .iter()
            .map(|&v| {
                acc += v;
                if total > 0.0 {
                    (acc / total).min(1.0)
                } else {
                    1.0
                }
            })
            .collect()
    }
}

/// The first `m` principal directions plus the cutoff they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedTransform {
    matrix: DenseMatrix,
    cutoff: f64,
    retained_variance: Option<f64>,
}

impl PrunedTransform {
    /// Wraps an arbitrary `d x m` matrix with orthonormal columns. The cutoff
    /// is `(d - m) / d`; retained variance is unknown without a spectrum.
    pub fn from_columns(matrix: DenseMatrix) -> Result<Self> {
        let (d, m) = matrix.shape();
        if d == 0 || m == 0 || m > d {
            return Err(Error::InvalidArgument(format!(
                "transform must be d x m with 1 <= m <= d, got {d}x{m}"
            )));
        }
        if let Some((i, j, ip)) = orthonormality_violation(&matrix) {
            return Err(Error::InvalidArgument(format!(
                "transform columns {i} and {j} are not orthonormal (inner product {ip})"
            )));
        }
        Ok(Self {
            matrix,
            cutoff: (d - m) as f64 / d as f64,
            retained_variance: None,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::from_columns(DenseMatrix::identity(dim))
    }

    pub fn dim_in(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn dim_out(&self) -> usize {
        self.matrix.n_cols()
    }

    /// `W_m`, shape `dim_in x dim_out`.
    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// `None` for transforms built with [`PrunedTransform::from_columns`].
    pub fn retained_variance(&self) -> Option<f64> {
        self.retained_variance
    }
}

fn orthonormality_violation(m: &DenseMatrix) -> Option<(usize, usize, f64)> {
    let cols = m.transpose();
    let n = m.n_rows();
    let k = m.n_cols();
    for i in 0..k {
        let ci = &cols.values()[i * n..(i + 1) * n];
        for j in i..k {
            let ip = dot(ci, &cols.values()[j * n..(j + 1) * n]);
            let expect = if i == j { 1.0 } else { 0.0 };
            if (ip - expect).abs() > ORTHONORMAL_TOL {
                return Some((i, j, ip));
            }
        }
    }
    None
}

/// Picks `count` distinct rows uniformly at random, keeping their original
/// relative order. Deterministic for a given seed.
pub fn sample_rows(d: &DenseMatrix, count: usize, seed: u64) -> Result<DenseMatrix> {
    let n = d.n_rows();
    if count == 0 || count > n {
        return Err(Error::InvalidArgument(format!(
            "sample size {count} outside 1..={n}"
        )));
    }
    if count == n {
        return Ok(d.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(d.select_rows(&picked))
}

/// Uncentered PCA: eigendecomposition of `sample^T sample`.
pub fn fit_pca(sample: &DenseMatrix, source_tag: &str) -> Result<PcaModel> {
    fit_from_gram_of(sample, sample.n_rows(), source_tag)
}

/// PCA on mean-centered rows. The mean only shapes the basis: transforms built
/// from this model are still plain projections `D W_m` with no mean
/// subtraction. The reconstruction identity against the eigenvalues does not
/// hold for such a model.
pub fn fit_pca_centered(sample: &DenseMatrix, source_tag: &str) -> Result<PcaModel> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (n, d) = sample.shape();
    let mut mean = vec![0.0; d];
    for row in sample.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centered = sample.values().to_vec();
    for row in centered.chunks_exact_mut(d) {
        for (v, m) in row.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let centered = DenseMatrix::new(n, d, centered)?;
    fit_from_gram_of(&centered, n, source_tag)
}

fn fit_from_gram_of(rows: &DenseMatrix, fitted_on: usize, source_tag: &str) -> Result<PcaModel> {
    let gram = gram_matrix(rows)?;
    let eig = sym_eigendecomposition(&gram)?;
    // the Gram matrix is PSD; anything negative is round-off
    let eigenvalues = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    PcaModel::from_parts(eigenvalues, eig.eigenvectors, fitted_on as u64, source_tag)
}

/// Number of dimensions kept at cutoff `c`: `d - round(c * d)`, rounding half
/// away from zero, clamped to `[1, d]`.
pub fn cutoff_to_m(c: f64, d: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidCutoff(c));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let removed = (c * d as f64).round() as usize;
    Ok(d.saturating_sub(removed).clamp(1, d))
}

pub fn prune_model(model: &PcaModel, c: f64) -> Result<PrunedTransform> {
    let m = cutoff_to_m(c, model.dim())?;
    let retained = model.retained_variance_curve()[m - 1];
    Ok(PrunedTransform {
        matrix: model.basis().leading_columns(m),
        cutoff: c,
        retained_variance: Some(retained),
    })
}

/// `D W_m`: the pruned document embeddings, one row per document.
pub fn transform_corpus(d: &DenseMatrix, t: &PrunedTransform) -> Result<DenseMatrix> {
    if d.n_cols() != t.dim_in() {
        return Err(Error::shape("transform_corpus", d.shape(), t.matrix.shape()));
    }
    project(d, &t.matrix)
}

/// `W_m^T q`.
pub fn transform_query(q: &[f64], t: &PrunedTransform) -> Result<Vec<f64>> {
    if q.len() != t.dim_in() {
        return Err(Error::shape(
            "transform_query",
            (1, q.len()),
            t.matrix.shape(),
        ));
    }
    let mut out = vec![0.0; t.dim_out()];
    for (i, &qi) in q.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(t.matrix.row(i)) {
            *o += w * qi;
        }
    }
    Ok(out)
}

/// `||D - D W_m W_m^T||_F^2`.
pub fn reconstruction_error(d: &DenseMatrix, t: &PrunedTransform) -> Result<f64> {
    if d.n_cols() != t.dim_in() {
        return Err(Error::shape(
            "reconstruction_error",
            d.shape(),
            t.matrix.shape(),
        ));
    }
    let w = &t.matrix;
    let mut total = 0.0;
    let mut coords = vec![0.0; t.dim_out()];
    for row in d.rows() {
        coords.iter_mut().for_each(|c| *c = 0.0);
        for (i, &x) in row.iter().enumerate() {
            for (c, &wv) in coords.iter_mut().zip(w.row(i)) {
                *c += x * wv;
            }
        }
        for (i, &x) in row.iter().enumerate() {
            let rebuilt = dot(w.row(i), &coords);
            total += (x - rebuilt) * (x - rebuilt);
        }
    }
    Ok(total)
}
