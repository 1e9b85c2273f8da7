//! Single-threaded query throughput measurement.

use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::{score_all, top_k, EmbeddingIndex};
use crate::matrix::DenseMatrix;
use crate::pca::{transform_query, PrunedTransform};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub tag: String,
    /// Index dimension the scores are computed in.
    pub dim: usize,
    pub n_docs: usize,
    pub n_queries: usize,
    pub k: usize,
    pub threads: usize,
    pub transformed: bool,
    /// Wall-clock seconds for one pass over all queries, per repetition.
    pub pass_secs: Vec<f64>,
    pub median_secs: f64,
    pub queries_per_sec: f64,
    pub mean_latency_ms: f64,
}

pub const TSV_HEADER: &str =
    "tag\tdim\tn_docs\tn_queries\tk\tthreads\ttransformed\trepetitions\tmedian_secs\tqueries_per_sec\tmean_latency_ms";

impl BenchReport {
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.3}\t{:.6}",
            self.tag,
            self.dim,
            self.n_docs,
            self.n_queries,
            self.k,
            self.threads,
            self.transformed,
            self.pass_secs.len(),
            self.median_secs,
            self.queries_per_sec,
            self.mean_latency_ms
        )
    }
}

/// Times `score_all + top_k` over every query, after one warm-up pass.
///
/// With a transform, queries are given in the original space and mapped with
/// `W_m^T q` inside the timed loop, so the per-query projection cost is
/// included.
pub fn bench_throughput(
    index: &EmbeddingIndex,
    queries: &DenseMatrix,
    transform: Option<&PrunedTransform>,
    repetitions: usize,
    k: usize,
) -> Result<BenchReport> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    if queries.n_rows() == 0 {
        return Err(Error::InvalidArgument("no queries to benchmark".into()));
    }
    let expected_in = transform.map_or(index.dim(), |t| t.dim_in());
    if queries.n_cols() != expected_in {
        return Err(Error::shape(
            "bench_throughput",
            queries.shape(),
            (expected_in, index.dim()),
        ));
    }
    if let Some(t) = transform {
        if t.dim_out() != index.dim() {
            return Err(Error::shape(
                "bench_throughput",
                t.matrix().shape(),
                (index.len(), index.dim()),
            ));
        }
    }

    let pass = || -> Result<f64> {
        let start = Instant::now();
        for q in queries.rows() {
            let scores = match transform {
                Some(t) => score_all(index, &transform_query(q, t)?)?,
                None => score_all(index, q)?,
            };
            black_box(top_k(&scores, index.doc_ids(), k)?);
        }
        Ok(start.elapsed().as_secs_f64())
    };

    pass()?;
    let mut pass_secs = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        pass_secs.push(pass()?);
    }
    let median_secs = median(&pass_secs);
    let n_queries = queries.n_rows();
    Ok(BenchReport {
        tag: index.tag().to_string(),
        dim: index.dim(),
        n_docs: index.len(),
        n_queries,
        k,
        threads: 1,
        transformed: transform.is_some(),
        pass_secs,
        median_secs,
        queries_per_sec: n_queries as f64 / median_secs,
        mean_latency_ms: 1e3 * median_secs / n_queries as f64,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
