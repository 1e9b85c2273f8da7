//! Exact inner-product retrieval over an in-memory embedding index.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, dot_f32, DenseMatrix};

/// Storage precision of an [`EmbeddingIndex`]. Scores are always accumulated
/// in 64 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingIndex {
    doc_ids: Vec<String>,
    storage: Storage,
    dim: usize,
    tag: String,
}

impl EmbeddingIndex {
    pub fn new(
        doc_ids: Vec<String>,
        matrix: &DenseMatrix,
        precision: Precision,
        tag: impl Into<String>,
    ) -> Result<Self> {
        if doc_ids.len() != matrix.n_rows() {
            return Err(Error::InvalidArgument(format!(
                "{} doc ids for {} embeddings",
                doc_ids.len(),
                matrix.n_rows()
            )));
        }
        if matrix.n_cols() == 0 {
            return Err(Error::InvalidArgument(
                "index dimension must be at least 1".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(doc_ids.len());
        if let Some(dup) = doc_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidArgument(format!("duplicate doc id {dup:?}")));
        }
        let storage = match precision {
            Precision::F32 => {
                let values: Vec<f32> = matrix.values().iter().map(|&v| v as f32).collect();
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "embedding value overflows 32-bit storage".into(),
                    ));
                }
                Storage::F32(values)
            }
            Precision::F64 => Storage::F64(matrix.values().to_vec()),
        };
        Ok(Self {
            doc_ids,
            storage,
            dim: matrix.n_cols(),
            tag: tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn precision(&self) -> Precision {
        match self.storage {
            Storage::F32(_) => Precision::F32,
            Storage::F64(_) => Precision::F64,
        }
    }

    /// Bytes used by the stored embeddings.
    pub fn payload_bytes(&self) -> usize {
        match &self.storage {
            Storage::F32(v) => v.len() * 4,
            Storage::F64(v) => v.len() * 8,
        }
    }

    /// Stored row `i`, widened to 64 bits.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let range = i * self.dim..(i + 1) * self.dim;
        match &self.storage {
            Storage::F32(v) => v[range].iter().map(|&x| x as f64).collect(),
            Storage::F64(v) => v[range].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit {
    pub doc_id: String,
    pub score: f64,
}

/// Hits ordered by descending score, ties by ascending doc id (byte-wise).
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub query_id: String,
    pub hits: Vec<ScoredHit>,
}

impl Ranking {
    /// Sorts arbitrary hits into ranking order.
    pub fn from_unsorted(query_id: impl Into<String>, mut hits: Vec<ScoredHit>) -> Self {
        hits.sort_by(|a, b| hit_order(a.score, &a.doc_id, b.score, &b.doc_id));
        Self {
            query_id: query_id.into(),
            hits,
        }
    }
}

#[inline]
fn hit_order(sa: f64, ida: &str, sb: f64, idb: &str) -> Ordering {
    sb.partial_cmp(&sa)
        .unwrap_or(Ordering::Equal)
        .then_with(|| ida.as_bytes().cmp(idb.as_bytes()))
}

/// `s(q) = D q` over every stored document.
pub fn score_all(index: &EmbeddingIndex, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != index.dim {
        return Err(Error::shape(
            "score_all",
            (index.len(), index.dim),
            (q.len(), 1),
        ));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scores = match &index.storage {
        Storage::F32(v) => v.chunks_exact(index.dim).map(|row| dot_f32(row, q)).collect(),
        Storage::F64(v) => v.chunks_exact(index.dim).map(|row| dot(row, q)).collect(),
    };
    Ok(scores)
}

/// The `k` best `(doc_id, score)` pairs in ranking order.
///
/// Quickselect partitions the candidates around the k-th best, then only the
/// first `k` are sorted: expected `O(n + k log k)`.
pub fn top_k(scores: &[f64], doc_ids: &[String], k: usize) -> Result<Vec<ScoredHit>> {
    if scores.len() != doc_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} doc ids",
            scores.len(),
            doc_ids.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let cmp = |&a: &usize, &b: &usize| hit_order(scores[a], &doc_ids[a], scores[b], &doc_ids[b]);
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    Ok(idx
        .into_iter()
        .map(|i| ScoredHit {
            doc_id: doc_ids[i].clone(),
            score: scores[i],
        })
        .collect())
}

pub fn search(index: &EmbeddingIndex, query_id: &str, q: &[f64], k: usize) -> Result<Ranking> {
    let scores = score_all(index, q)?;
    Ok(Ranking {
        query_id: query_id.to_string(),
        hits: top_k(&scores, &index.doc_ids, k)?,
    })
}

/// Runs every query, one ranking per query, in query order. Queries are
/// distributed over the rayon pool; each ranking is computed sequentially.
pub fn search_batch(
    index: &EmbeddingIndex,
    query_ids: &[String],
    queries: &DenseMatrix,
    k: usize,
) -> Result<Vec<Ranking>> {
    if query_ids.len() != queries.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "{} query ids for {} query vectors",
            query_ids.len(),
            queries.n_rows()
        )));
    }
    (0..queries.n_rows())
        .into_par_iter()
        .map(|i| search(index, &query_ids[i], queries.row(i), k))
        .collect()
}
