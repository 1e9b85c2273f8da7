//! End-to-end workflows behind the `prunerank` subcommands. Each takes
//! already-parsed arguments, reads and writes files, and returns a summary
//! for the caller to print.
//!
//! Out-of-domain pruning needs no dedicated workflow: fit on one corpus with
//! [`fit`], then point [`prune_transform`] or [`search`] at another.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::bench::{self, BenchReport};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, shared_queries, EvalConfig, Metric, MetricReport, Qrels};
use crate::index::{search_batch, EmbeddingIndex, Precision, Ranking};
use crate::io;
use crate::matrix::DenseMatrix;
use crate::pca::{
    cutoff_to_m, fit_pca, fit_pca_centered, prune_model, sample_rows, transform_corpus,
    PcaModel, PrunedTransform,
};
use crate::stats::{wilcoxon_signed_rank, WilcoxonResult};
use crate::synth::{generate as synth_generate, SynthSpec};

/// Default number of rows sampled for fitting.
pub const DEFAULT_SAMPLE_SIZE: usize = 100_000;

pub fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ))
    }
}

/// Loads vectors plus their id sidecar.
pub fn load_with_ids(vectors: &Path, ids: &Path) -> Result<(DenseMatrix, Vec<String>)> {
    require_file(vectors)?;
    require_file(ids)?;
    let m = io::read_vectors(vectors)?;
    let ids = io::read_ids_for(ids, m.n_rows())?;
    Ok((m, ids))
}

pub fn cutoff_tag(c: f64) -> String {
    format!("pca-c{}", (c * 100.0).round() as i64)
}

fn clamp_sample(requested: usize, n: usize) -> usize {
    if requested > n {
        warn!("sample size {requested} exceeds {n} available rows; using {n}");
        n
    } else {
        requested
    }
}

fn fit_sample(docs: &DenseMatrix, sample_size: usize, seed: u64, center: bool, tag: &str) -> Result<PcaModel> {
    let sample = sample_rows(docs, clamp_sample(sample_size, docs.n_rows()), seed)?;
    if center {
        fit_pca_centered(&sample, tag)
    } else {
        fit_pca(&sample, tag)
    }
}

#[derive(Debug, Clone)]
pub struct FitArgs {
    pub docs: PathBuf,
    pub sample_size: usize,
    pub seed: u64,
    pub center: bool,
    pub source_tag: Option<String>,
    pub out_model: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub dim: usize,
    pub fitted_on: u64,
    pub source_tag: String,
    /// `(cutoff, m, retained variance)` at a few reference cutoffs.
    pub curve: Vec<(f64, usize, f64)>,
}

impl FitSummary {
    pub fn render(&self) -> String {
        let mut out = format!(
            "dim\t{}\nfitted_on\t{}\nsource_tag\t{}\ncutoff\tm\tretained_variance\n",
            self.dim, self.fitted_on, self.source_tag
        );
        for (c, m, v) in &self.curve {
            let _ = writeln!(out, "{c}\t{m}\t{v:.6}");
        }
        out
    }
}

pub fn fit(args: &FitArgs) -> Result<FitSummary> {
    require_file(&args.docs)?;
    let docs = io::read_vectors(&args.docs)?;
    if docs.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let tag = args
        .source_tag
        .clone()
        .unwrap_or_else(|| args.docs.display().to_string());
    let model = fit_sample(&docs, args.sample_size, args.seed, args.center, &tag)?;
    io::save_pca(&args.out_model, &model)?;
    let curve_values = model.retained_variance_curve();
    let curve = [0.0, 0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|&c| {
            let m = cutoff_to_m(c, model.dim())?;
            Ok((c, m, curve_values[m - 1]))
        })
        .collect::<Result<_>>()?;
    Ok(FitSummary {
        dim: model.dim(),
        fitted_on: model.fitted_on(),
        source_tag: tag,
        curve,
    })
}

#[derive(Debug, Clone)]
pub struct PruneArgs {
    pub docs: PathBuf,
    pub model: PathBuf,
    pub cutoff: f64,
    pub out_vectors: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct PruneSummary {
    pub n_docs: usize,
    pub dim_in: usize,
    pub dim_out: usize,
    pub retained_variance: f64,
    pub bytes_written: u64,
}

pub fn prune_transform(args: &PruneArgs) -> Result<PruneSummary> {
    if !(0.0..1.0).contains(&args.cutoff) {
        return Err(Error::InvalidCutoff(args.cutoff));
    }
    require_file(&args.docs)?;
    require_file(&args.model)?;
    let model = io::load_pca(&args.model)?;
    let t = prune_model(&model, args.cutoff)?;
    let docs = io::read_vectors(&args.docs)?;
    let pruned = transform_corpus(&docs, &t)?;
    io::write_vectors(&args.out_vectors, &pruned)?;
    let bytes_written = fs::metadata(&args.out_vectors)
        .map_err(|e| Error::io(&args.out_vectors, e))?
        .len();
    Ok(PruneSummary {
        n_docs: pruned.n_rows(),
        dim_in: t.dim_in(),
        dim_out: t.dim_out(),
        retained_variance: t.retained_variance().unwrap_or(f64::NAN),
        bytes_written,
    })
}

#[derive(Debug, Clone)]
pub struct SearchArgs {
    pub index_vectors: PathBuf,
    pub index_ids: PathBuf,
    pub queries: PathBuf,
    pub query_ids: PathBuf,
    pub model: Option<PathBuf>,
    pub cutoff: Option<f64>,
    /// The index file already holds `D W_m`; only queries are transformed.
    pub pretransformed: bool,
    pub k: usize,
    pub tag: Option<String>,
    pub out_run: PathBuf,
}

/// Builds the search index and the query matrix in index space.
///
/// Raw indexes loaded from disk keep their file precision. Indexes transformed
/// in memory are held in 64 bits so that `c = 0` reproduces the unpruned
/// ranking exactly.
pub fn prepare_search(args: &SearchArgs) -> Result<(EmbeddingIndex, DenseMatrix, Vec<String>, String)> {
    let (docs, doc_ids) = load_with_ids(&args.index_vectors, &args.index_ids)?;
    let (queries, query_ids) = load_with_ids(&args.queries, &args.query_ids)?;
    if docs.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let file_precision = if io::is_f64_path(&args.index_vectors) {
        Precision::F64
    } else {
        Precision::F32
    };
    let transform = match (&args.model, args.cutoff) {
        (Some(model), Some(c)) => {
            require_file(model)?;
            Some(prune_model(&io::load_pca(model)?, c)?)
        }
        (Some(_), None) => {
            return Err(Error::InvalidArgument("--model requires --cutoff".into()));
        }
        (None, Some(_)) => {
            return Err(Error::InvalidArgument("--cutoff requires --model".into()));
        }
        (None, None) if args.pretransformed => {
            return Err(Error::InvalidArgument("--pretransformed requires --model".into()));
        }
        (None, None) => None,
    };
    let Some(t) = transform else {
        let tag = args.tag.clone().unwrap_or_else(|| "full".into());
        let index = EmbeddingIndex::new(doc_ids, &docs, file_precision, tag.clone())?;
        return Ok((index, queries, query_ids, tag));
    };
    let tag = args.tag.clone().unwrap_or_else(|| cutoff_tag(t.cutoff()));
    let q_hat = transform_corpus(&queries, &t)?;
    let index = if args.pretransformed {
        if docs.n_cols() != t.dim_out() {
            return Err(Error::shape("search (pretransformed index)", docs.shape(), t.matrix().shape()));
        }
        EmbeddingIndex::new(doc_ids, &docs, file_precision, tag.clone())?
    } else {
        let d_hat = transform_corpus(&docs, &t)?;
        EmbeddingIndex::new(doc_ids, &d_hat, Precision::F64, tag.clone())?
    };
    Ok((index, q_hat, query_ids, tag))
}

pub fn search(args: &SearchArgs) -> Result<usize> {
    let (index, queries, query_ids, tag) = prepare_search(args)?;
    let rankings = search_batch(&index, &query_ids, &queries, args.k)?;
    io::write_run(&args.out_run, &rankings, &tag)?;
    Ok(rankings.len())
}

pub fn render_eval_tsv(reports: &[MetricReport]) -> String {
    let mut out = String::from("metric\tquery_id\tvalue\n");
    for r in reports {
        for (q, v) in &r.per_query {
            let _ = writeln!(out, "{}\t{q}\t{v:.6}", r.metric);
        }
    }
    for r in reports {
        let _ = writeln!(out, "{}\tall\t{:.6}", r.metric, r.mean);
    }
    out
}

pub fn eval(run: &Path, qrels: &Path, cfg: &EvalConfig) -> Result<Vec<MetricReport>> {
    require_file(run)?;
    require_file(qrels)?;
    let run = io::read_run(run)?;
    let qrels = io::read_qrels(qrels)?;
    evaluate_run(&run, &qrels, cfg)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize report: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub metric: String,
    pub n_queries: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub alpha: f64,
    pub significant: bool,
    pub wilcoxon: WilcoxonResult,
}

impl CompareReport {
    pub fn render(&self) -> String {
        format!(
            "metric\tn_queries\tmean_a\tmean_b\tdelta\tstatistic\tn_effective\tp_value\talpha\tsig\n{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{:.6e}\t{}\t{}\n",
            self.metric,
            self.n_queries,
            self.mean_a,
            self.mean_b,
            self.mean_b - self.mean_a,
            self.wilcoxon.statistic,
            self.wilcoxon.n_effective,
            self.wilcoxon.p_two_tailed,
            self.alpha,
            self.significant
        )
    }
}

/// Paired comparison of two runs on one metric over every judged query.
pub fn compare_runs(
    run_a: &[Ranking],
    run_b: &[Ranking],
    qrels: &Qrels,
    metric: Metric,
    cfg: &EvalConfig,
    alpha: f64,
) -> Result<CompareReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1)")));
    }
    if shared_queries(run_a, run_b).is_empty() {
        return Err(Error::InvalidArgument("runs share no queries".into()));
    }
    let cfg = EvalConfig {
        metrics: vec![metric],
        ..cfg.clone()
    };
    let a = evaluate_run(run_a, qrels, &cfg)?.remove(0);
    let b = evaluate_run(run_b, qrels, &cfg)?.remove(0);
    let (xs, ys) = paired_values(&a, &b);
    let wilcoxon = wilcoxon_signed_rank(&xs, &ys)?;
    Ok(CompareReport {
        metric: a.metric.clone(),
        n_queries: xs.len(),
        mean_a: a.mean,
        mean_b: b.mean,
        alpha,
        significant: wilcoxon.is_significant(alpha),
        wilcoxon,
    })
}

fn paired_values(a: &MetricReport, b: &MetricReport) -> (Vec<f64>, Vec<f64>) {
    a.per_query
        .iter()
        .filter_map(|(q, &x)| b.per_query.get(q).map(|&y| (x, y)))
        .unzip()
}

pub fn compare(
    run_a: &Path,
    run_b: &Path,
    qrels: &Path,
    metric: Metric,
    cfg: &EvalConfig,
    alpha: f64,
) -> Result<CompareReport> {
    for p in [run_a, run_b, qrels] {
        require_file(p)?;
    }
    compare_runs(
        &io::read_run(run_a)?,
        &io::read_run(run_b)?,
        &io::read_qrels(qrels)?,
        metric,
        cfg,
        alpha,
    )
}

/// In-memory inputs of a pruning sweep.
#[derive(Debug, Clone)]
pub struct SweepInput<'a> {
    pub docs: &'a DenseMatrix,
    pub doc_ids: &'a [String],
    pub queries: &'a DenseMatrix,
    pub query_ids: &'a [String],
    pub qrels: &'a Qrels,
    /// Corpus the PCA is fitted on; `None` fits on `docs` (in-domain).
    pub fit_docs: Option<&'a DenseMatrix>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub cutoffs: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub seed: u64,
    pub k: usize,
    pub center: bool,
    pub eval: EvalConfig,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCell {
    pub metric: String,
    pub mean: f64,
    /// `None` on the baseline row.
    pub p_value: Option<f64>,
    pub significant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// `None` marks the unpruned baseline.
    pub sample_size: Option<usize>,
    pub cutoff: Option<f64>,
    pub m: usize,
    pub retained_variance: Option<f64>,
    pub cells: Vec<MetricCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

const DASH: &str = "–";

impl SweepTable {
    pub fn baseline(&self) -> &SweepRow {
        &self.rows[0]
    }

    pub fn grid_rows(&self) -> &[SweepRow] {
        &self.rows[1..]
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sample_size\tcutoff\tm\tretained_variance");
        for cell in &self.rows[0].cells {
            let _ = write!(out, "\t{0}\t{0}_p\t{0}_sig", cell.metric);
        }
        out.push('\n');
        for row in &self.rows {
            let opt = |v: Option<String>| v.unwrap_or_else(|| DASH.to_string());
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}",
                opt(row.sample_size.map(|s| s.to_string())),
                opt(row.cutoff.map(|c| c.to_string())),
                row.m,
                opt(row.retained_variance.map(|v| format!("{v:.6}")))
            );
            for cell in &row.cells {
                let _ = write!(
                    out,
                    "\t{:.6}\t{}\t{}",
                    cell.mean,
                    opt(cell.p_value.map(|p| format!("{p:.6e}"))),
                    opt(cell.significant.map(|s| s.to_string()))
                );
            }
            out.push('\n');
        }
        out
    }
}

fn run_and_evaluate(
    index: &EmbeddingIndex,
    queries: &DenseMatrix,
    input: &SweepInput<'_>,
    cfg: &SweepConfig,
) -> Result<Vec<MetricReport>> {
    let rankings = search_batch(index, input.query_ids, queries, cfg.k)?;
    evaluate_run(&rankings, input.qrels, &cfg.eval)
}

/// Runs the unpruned baseline and every `sample size x cutoff` cell, testing
/// each cell against the baseline per metric.
pub fn sweep(input: &SweepInput<'_>, cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.cutoffs.is_empty() || cfg.sample_sizes.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one cutoff and one sample size".into()));
    }
    for &c in &cfg.cutoffs {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidCutoff(c));
        }
    }
    if input.docs.n_rows() == 0 || input.queries.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let dim = input.docs.n_cols();
    let fit_docs = input.fit_docs.unwrap_or(input.docs);
    if fit_docs.n_cols() != dim {
        return Err(Error::shape("sweep (fit corpus)", fit_docs.shape(), input.docs.shape()));
    }

    let full = EmbeddingIndex::new(input.doc_ids.to_vec(), input.docs, Precision::F64, "full")?;
    let baseline = run_and_evaluate(&full, input.queries, input, cfg)?;
    let mut rows = vec![SweepRow {
        sample_size: None,
        cutoff: None,
        m: dim,
        retained_variance: None,
        cells: baseline
            .iter()
            .map(|r| MetricCell {
                metric: r.metric.clone(),
                mean: r.mean,
                p_value: None,
                significant: None,
            })
            .collect(),
    }];

    for &size in &cfg.sample_sizes {
        let size = clamp_sample(size, fit_docs.n_rows());
        let model = fit_sample(fit_docs, size, cfg.seed, cfg.center, "sweep")?;
        for &c in &cfg.cutoffs {
            let t: PrunedTransform = prune_model(&model, c)?;
            info!("sweep: sample {size}, cutoff {c}, m = {}", t.dim_out());
            let d_hat = transform_corpus(input.docs, &t)?;
            let q_hat = transform_corpus(input.queries, &t)?;
            let index = EmbeddingIndex::new(input.doc_ids.to_vec(), &d_hat, Precision::F64, cutoff_tag(c))?;
            let reports = run_and_evaluate(&index, &q_hat, input, cfg)?;
            let cells = reports
                .iter()
                .zip(&baseline)
                .map(|(r, base)| {
                    let (xs, ys) = paired_values(base, r);
                    let w = wilcoxon_signed_rank(&xs, &ys)?;
                    Ok(MetricCell {
                        metric: r.metric.clone(),
                        mean: r.mean,
                        p_value: Some(w.p_two_tailed),
                        significant: Some(w.is_significant(cfg.alpha)),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(SweepRow {
                sample_size: Some(size),
                cutoff: Some(c),
                m: t.dim_out(),
                retained_variance: t.retained_variance(),
                cells,
            });
        }
    }
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone)]
pub struct SweepFiles {
    pub docs: PathBuf,
    pub doc_ids: PathBuf,
    pub queries: PathBuf,
    pub query_ids: PathBuf,
    pub qrels: PathBuf,
    pub fit_docs: Option<PathBuf>,
}

pub fn sweep_files(files: &SweepFiles, cfg: &SweepConfig) -> Result<SweepTable> {
    let (docs, doc_ids) = load_with_ids(&files.docs, &files.doc_ids)?;
    let (queries, query_ids) = load_with_ids(&files.queries, &files.query_ids)?;
    require_file(&files.qrels)?;
    let qrels = io::read_qrels(&files.qrels)?;
    let fit_docs = match &files.fit_docs {
        Some(p) => {
            require_file(p)?;
            Some(io::read_vectors(p)?)
        }
        None => None,
    };
    sweep(
        &SweepInput {
            docs: &docs,
            doc_ids: &doc_ids,
            queries: &queries,
            query_ids: &query_ids,
            qrels: &qrels,
            fit_docs: fit_docs.as_ref(),
        },
        cfg,
    )
}

/// Paths written by [`generate`].
#[derive(Debug, Clone, Serialize)]
pub struct GeneratedFiles {
    pub docs: PathBuf,
    pub doc_ids: PathBuf,
    pub queries: PathBuf,
    pub query_ids: PathBuf,
    pub qrels: PathBuf,
}

impl GeneratedFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            docs: dir.join("docs.fvecs"),
            doc_ids: dir.join("docs.ids"),
            queries: dir.join("queries.fvecs"),
            query_ids: dir.join("queries.ids"),
            qrels: dir.join("qrels.txt"),
        }
    }
}

pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<GeneratedFiles> {
    let corpus = synth_generate(spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = GeneratedFiles::in_dir(out_dir);
    io::write_vectors(&files.docs, &corpus.docs)?;
    io::write_ids(&files.doc_ids, &corpus.doc_ids)?;
    io::write_vectors(&files.queries, &corpus.queries)?;
    io::write_ids(&files.query_ids, &corpus.query_ids)?;
    io::write_qrels(&files.qrels, &corpus.qrels)?;
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub docs: PathBuf,
    pub queries: PathBuf,
    pub model: Option<PathBuf>,
    pub cutoffs: Vec<f64>,
    pub repetitions: usize,
    pub k: usize,
}

/// Benchmarks the full index and, with a model, one pruned index per cutoff.
/// Pruned indexes are stored in 32 bits like the full one.
pub fn bench(args: &BenchArgs) -> Result<Vec<BenchReport>> {
    require_file(&args.docs)?;
    require_file(&args.queries)?;
    let docs = io::read_vectors(&args.docs)?;
    let queries = io::read_vectors(&args.queries)?;
    if docs.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let ids: Vec<String> = (0..docs.n_rows()).map(|i| i.to_string()).collect();
    let mut reports = vec![bench::bench_throughput(
        &EmbeddingIndex::new(ids.clone(), &docs, Precision::F32, "full")?,
        &queries,
        None,
        args.repetitions,
        args.k,
    )?];
    if let Some(model) = &args.model {
        require_file(model)?;
        let model = io::load_pca(model)?;
        for &c in &args.cutoffs {
            let t = prune_model(&model, c)?;
            let pruned = transform_corpus(&docs, &t)?;
            let index = EmbeddingIndex::new(ids.clone(), &pruned, Precision::F32, cutoff_tag(c))?;
            reports.push(bench::bench_throughput(&index, &queries, Some(&t), args.repetitions, args.k)?);
        }
    } else if !args.cutoffs.is_empty() {
        return Err(Error::InvalidArgument("--cutoff requires --model".into()));
    }
    Ok(reports)
}

pub fn render_bench_tsv(reports: &[BenchReport]) -> String {
    let mut out = String::from(bench::TSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.tsv_row());
        out.push('\n');
    }
    out
}

/// Mean per metric, keyed by metric name.
pub fn means(reports: &[MetricReport]) -> BTreeMap<String, f64> {
    reports.iter().map(|r| (r.metric.clone(), r.mean)).collect()
}
