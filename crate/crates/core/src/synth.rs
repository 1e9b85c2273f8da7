//! Synthetic corpora with a known intrinsic rank and planted relevance.
//!
//! Documents and queries follow a linear factor model: `r` orthonormal latent
//! directions in `R^d`, factor `i` scaled by `decay^i`, plus isotropic
//! Gaussian noise. For each query the `k_relevant` documents with the highest
//! noise-free dot product are judged relevant (grade 1).
//!
//! Randomness comes from ChaCha8 seeded with `seed`; each matrix draws from
//! its own stream (see [`Stream`]), so outputs are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::index::top_k;
use crate::matrix::{dot, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub n_queries: usize,
    pub dim: usize,
    pub intrinsic_rank: usize,
    /// Scale ratio between consecutive latent factors, in `(0, 1]`.
    pub signal_decay: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Seed for the latent basis alone; `None` uses `seed`. Sharing it across
    /// corpora draws them from one latent model with independent samples.
    pub latent_seed: Option<u64>,
    pub k_relevant: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_docs == 0 || self.n_queries == 0 || self.dim == 0 || self.intrinsic_rank == 0 {
            return bad("document, query, dimension and rank counts must be >= 1".into());
        }
        if self.intrinsic_rank > self.dim {
            return bad(format!(
                "intrinsic rank {} exceeds dimension {}",
                self.intrinsic_rank, self.dim
            ));
        }
        if !(self.signal_decay > 0.0 && self.signal_decay <= 1.0) {
            return bad(format!("signal decay {} outside (0, 1]", self.signal_decay));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be finite and >= 0", self.noise_sigma));
        }
        if self.k_relevant == 0 || self.k_relevant > self.n_docs {
            return bad(format!(
                "k_relevant {} outside 1..={}",
                self.k_relevant, self.n_docs
            ));
        }
        Ok(())
    }
}

/// Stream ids used for the independent draws of one corpus.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    LatentBasis = 0,
    DocFactors = 1,
    DocNoise = 2,
    QueryFactors = 3,
    QueryNoise = 4,
}

fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub docs: DenseMatrix,
    pub doc_ids: Vec<String>,
    pub queries: DenseMatrix,
    pub query_ids: Vec<String>,
    pub qrels: Qrels,
    /// `r x d`, orthonormal rows spanning the signal subspace.
    pub latent_basis: DenseMatrix,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let (d, r) = (spec.dim, spec.intrinsic_rank);
    let basis_seed = spec.latent_seed.unwrap_or(spec.seed);
    let basis = orthonormal_rows(gaussian(&mut rng_for(basis_seed, Stream::LatentBasis), r * d), r, d);
    let scales: Vec<f64> = (0..r).map(|i| spec.signal_decay.powi(i as i32)).collect();

    let draw = |n: usize, factors: Stream, noise: Stream| {
        let mut z = gaussian(&mut rng_for(spec.seed, factors), n * r);
        for row in z.chunks_exact_mut(r) {
            for (v, s) in row.iter_mut().zip(&scales) {
                *v *= s;
            }
        }
        let noise = gaussian(&mut rng_for(spec.seed, noise), n * d);
        let mut out = vec![0.0; n * d];
        for (i, out_row) in out.chunks_exact_mut(d).enumerate() {
            for (l, &coef) in z[i * r..(i + 1) * r].iter().enumerate() {
                for (o, &b) in out_row.iter_mut().zip(&basis[l * d..(l + 1) * d]) {
                    *o += coef * b;
                }
            }
            for (o, &e) in out_row.iter_mut().zip(&noise[i * d..(i + 1) * d]) {
                *o += spec.noise_sigma * e;
            }
        }
        (z, out)
    };

    let (doc_latent, docs) = draw(spec.n_docs, Stream::DocFactors, Stream::DocNoise);
    let (query_latent, queries) = draw(spec.n_queries, Stream::QueryFactors, Stream::QueryNoise);
    let doc_ids = numbered_ids("d", spec.n_docs);
    let query_ids = numbered_ids("q", spec.n_queries);

    let mut qrels = Qrels::new();
    let mut scores = vec![0.0; spec.n_docs];
    for (qi, qz) in query_latent.chunks_exact(r).enumerate() {
        for (s, dz) in scores.iter_mut().zip(doc_latent.chunks_exact(r)) {
            *s = dot(dz, qz);
        }
        for hit in top_k(&scores, &doc_ids, spec.k_relevant)? {
            qrels.insert(&query_ids[qi], &hit.doc_id, 1)?;
        }
    }

    Ok(SynthCorpus {
        docs: DenseMatrix::new(spec.n_docs, d, docs)?,
        doc_ids,
        queries: DenseMatrix::new(spec.n_queries, d, queries)?,
        query_ids,
        qrels,
        latent_basis: DenseMatrix::new(r, d, basis)?,
    })
}

/// Zero-padded ids so lexicographic and numeric order agree.
fn numbered_ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// Modified Gram-Schmidt, applied twice.
fn orthonormal_rows(mut v: Vec<f64>, rows: usize, cols: usize) -> Vec<f64> {
    for _ in 0..2 {
        for i in 0..rows {
            for j in 0..i {
                let (head, tail) = v.split_at_mut(i * cols);
                let prev = &head[j * cols..(j + 1) * cols];
                let cur = &mut tail[..cols];
                let proj = dot(prev, cur);
                for (c, p) in cur.iter_mut().zip(prev) {
                    *c -= proj * p;
                }
            }
            let cur = &mut v[i * cols..(i + 1) * cols];
            let norm = dot(cur, cur).sqrt();
            cur.iter_mut().for_each(|c| *c /= norm);
        }
    }
    v
}
