//! Cyclic Jacobi eigensolver for real symmetric matrices.
//!
//! Each sweep visits every off-diagonal pair `(p, q)`, `p < q`, in row order
//! and applies the plane rotation that zeroes `a[p][q]`. Rotations are
//! accumulated into the eigenvector matrix. The solver stops once the
//! off-diagonal Frobenius norm falls to `1e-12 * ||S||_F`.
//!
//! Output is deterministic: eigenpairs are stably sorted by descending
//! eigenvalue and every eigenvector is oriented so that its largest-magnitude
//! component is positive.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SymmetricMatrix};

pub const MAX_SWEEPS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Relative tolerance used when two components compete for "largest magnitude"
/// in the sign convention. The lower index wins within it.
const SIGN_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// `dim x dim`; column `i` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: DenseMatrix,
    pub sweeps: usize,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

pub fn sym_eigendecomposition(s: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let dim = s.dim();
    if dim == 0 {
        return Err(Error::EmptyInput);
    }
    let mut a = s.values().to_vec();
    // Rows of `vt` are eigenvectors, so each rotation touches two contiguous rows.
    let mut vt = DenseMatrix::identity(dim).into_values();
    let norm = s.frobenius_norm();
    let threshold = CONVERGENCE_TOL * norm;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&a, dim);
        if off <= threshold {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NotConverged {
                sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        for p in 0..dim {
            for q in (p + 1)..dim {
                rotate(&mut a, &mut vt, dim, p, q, sweeps > 4);
            }
        }
    }

    let raw: Vec<f64> = (0..dim).map(|i| a[i * dim + i]).collect();
    let mut order: Vec<usize> = (0..dim).collect();
    // stable: equal eigenvalues keep solver order
    order.sort_by(|&i, &j| raw[j].partial_cmp(&raw[i]).unwrap_or(std::cmp::Ordering::Equal));

    let clamp_floor = -1e-8 * norm.max(1.0);
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut vectors = vec![0.0; dim * dim];
    for (col, &src) in order.iter().enumerate() {
        let lambda = raw[src];
        eigenvalues.push(if lambda < 0.0 && lambda >= clamp_floor {
            0.0
        } else {
            lambda
        });
        let v = &vt[src * dim..(src + 1) * dim];
        let flip = if v[dominant_component(v)] < 0.0 { -1.0 } else { 1.0 };
        for (row, &x) in v.iter().enumerate() {
            vectors[row * dim + col] = flip * x;
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: DenseMatrix::new(dim, dim, vectors)?,
        sweeps,
    })
}

fn off_diagonal_norm(a: &[f64], dim: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                sum += a[i * dim + j] * a[i * dim + j];
            }
        }
    }
    sum.sqrt()
}

fn rotate(a: &mut [f64], vt: &mut [f64], dim: usize, p: usize, q: usize, allow_skip: bool) {
    let apq = a[p * dim + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * dim + p];
    let aqq = a[q * dim + q];
    // negligible relative to both diagonal entries: zero it without rotating
    let g = 100.0 * apq.abs();
    if allow_skip && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        a[p * dim + q] = 0.0;
        a[q * dim + p] = 0.0;
        return;
    }

    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let t = 1.0 / (theta.abs() + (theta * theta + 1.0).sqrt());
        if theta < 0.0 {
            -t
        } else {
            t
        }
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..dim {
        if k == p || k == q {
            continue;
        }
        let akp = a[p * dim + k];
        let akq = a[q * dim + k];
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[p * dim + k] = new_p;
        a[k * dim + p] = new_p;
        a[q * dim + k] = new_q;
        a[k * dim + q] = new_q;
    }
    a[p * dim + p] = app - t * apq;
    a[q * dim + q] = aqq + t * apq;
    a[p * dim + q] = 0.0;
    a[q * dim + p] = 0.0;

    let (head, tail) = vt.split_at_mut(q * dim);
    let vp = &mut head[p * dim..(p + 1) * dim];
    let vq = &mut tail[..dim];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Index of the largest-magnitude component; near-ties go to the lowest index.
fn dominant_component(v: &[f64]) -> usize {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter()
        .position(|x| x.abs() >= max * (1.0 - SIGN_TIE_TOL))
        .unwrap_or(0)
}
