use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prunerank::eval::{EvalConfig, Gain, Metric};
use prunerank::synth::SynthSpec;
use prunerank::workflow::{self, DEFAULT_SAMPLE_SIZE};

#[derive(Parser)]
#[command(name = "prunerank", version, about = "Static PCA dimension pruning for dense retrieval")]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, env = "PRUNERANK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus with planted relevance.
    Generate(GenerateArgs),
    /// Fit a PCA model on a sample of document vectors.
    Fit(FitCmd),
    /// Project document vectors onto the leading components of a model.
    Prune(PruneCmd),
    /// Exact top-k retrieval, optionally through a pruned model.
    Search(SearchCmd),
    /// Score a run against relevance judgments.
    Eval(EvalCmd),
    /// Paired Wilcoxon test between two runs on one metric.
    Compare(CompareCmd),
    /// Evaluate a grid of cutoffs and sample sizes against the unpruned baseline.
    Sweep(SweepCmd),
    /// Single-threaded query throughput, full and pruned.
    Bench(BenchCmd),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_docs: usize,
    #[arg(long, default_value_t = 200)]
    n_queries: usize,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 32)]
    rank: usize,
    #[arg(long, default_value_t = 0.95)]
    decay: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    k_relevant: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the latent basis; share it to draw corpora from one model.
    #[arg(long)]
    latent_seed: Option<u64>,
}

#[derive(Args, Clone)]
struct MetricFlags {
    /// nDCG gain: exp (2^rel - 1) or linear (rel).
    #[arg(long, default_value = "exp")]
    gain: Gain,
    /// Minimum grade counted as relevant for AP and MRR.
    #[arg(long, default_value_t = 1)]
    rel_threshold: u32,
    /// Ranking depth considered per query.
    #[arg(long, default_value_t = 1000)]
    depth: usize,
}

impl MetricFlags {
    fn config(&self, metrics: Vec<Metric>) -> EvalConfig {
        EvalConfig {
            metrics,
            gain: self.gain,
            rel_threshold: self.rel_threshold,
            depth: self.depth,
        }
    }
}

#[derive(Args)]
struct FitCmd {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean-center the sample before fitting; only the basis changes.
    #[arg(long)]
    center: bool,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PruneCmd {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cutoff: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SearchCmd {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    index_ids: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    query_ids: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// The index file was already written by `prune` at this cutoff.
    #[arg(long)]
    pretransformed: bool,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long)]
    tag: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Metrics such as AP, nDCG@10, MRR@10 (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "AP,nDCG@10,MRR@10")]
    metrics: Vec<Metric>,
    #[command(flatten)]
    flags: MetricFlags,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct CompareCmd {
    #[arg(long)]
    run_a: PathBuf,
    #[arg(long)]
    run_b: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[arg(long, default_value = "nDCG@10")]
    metric: Metric,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[command(flatten)]
    flags: MetricFlags,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    doc_ids: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    query_ids: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    /// Fit on this corpus instead of the searched one (out-of-domain).
    #[arg(long)]
    fit_docs: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    cutoff: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000")]
    sample_size: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    k: usize,
    #[arg(long)]
    center: bool,
    #[arg(long, value_delimiter = ',', default_value = "AP,nDCG@10,MRR@10")]
    metrics: Vec<Metric>,
    #[command(flatten)]
    flags: MetricFlags,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCmd {
    #[arg(long)]
    docs: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    cutoff: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 1000)]
    k: usize,
}

fn check_cutoffs(cutoffs: &[f64]) -> Result<()> {
    for &c in cutoffs {
        if !(0.0..1.0).contains(&c) {
            bail!("cutoff {c} outside [0, 1)");
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    match cli.command {
        Command::Generate(a) => {
            let spec = SynthSpec {
                n_docs: a.n_docs,
                n_queries: a.n_queries,
                dim: a.dim,
                intrinsic_rank: a.rank,
                signal_decay: a.decay,
                noise_sigma: a.sigma,
                seed: a.seed,
                latent_seed: a.latent_seed,
                k_relevant: a.k_relevant,
            };
            let files = workflow::generate(&spec, &a.out_dir)?;
            println!("{}", serde_json::to_string_pretty(&files)?);
        }
        Command::Fit(a) => {
            let summary = workflow::fit(&workflow::FitArgs {
                docs: a.docs,
                sample_size: a.sample_size,
                seed: a.seed,
                center: a.center,
                source_tag: a.tag,
                out_model: a.out,
            })?;
            print!("{}", summary.render());
        }
        Command::Prune(a) => {
            check_cutoffs(&[a.cutoff])?;
            let s = workflow::prune_transform(&workflow::PruneArgs {
                docs: a.docs,
                model: a.model,
                cutoff: a.cutoff,
                out_vectors: a.out,
            })?;
            println!(
                "n_docs\tdim_in\tdim_out\tretained_variance\tbytes\n{}\t{}\t{}\t{:.6}\t{}",
                s.n_docs, s.dim_in, s.dim_out, s.retained_variance, s.bytes_written
            );
        }
        Command::Search(a) => {
            if let Some(c) = a.cutoff {
                check_cutoffs(&[c])?;
            }
            let n = workflow::search(&workflow::SearchArgs {
                index_vectors: a.index,
                index_ids: a.index_ids,
                queries: a.queries,
                query_ids: a.query_ids,
                model: a.model,
                cutoff: a.cutoff,
                pretransformed: a.pretransformed,
                k: a.k,
                tag: a.tag,
                out_run: a.out,
            })?;
            log::info!("searched {n} queries");
        }
        Command::Eval(a) => {
            let cfg = a.flags.config(a.metrics);
            let reports = workflow::eval(&a.run, &a.qrels, &cfg)?;
            print!("{}", workflow::render_eval_tsv(&reports));
            if let Some(path) = a.json {
                workflow::write_json(&path, &reports)?;
            }
        }
        Command::Compare(a) => {
            let cfg = a.flags.config(vec![a.metric]);
            let report = workflow::compare(&a.run_a, &a.run_b, &a.qrels, a.metric, &cfg, a.alpha)?;
            print!("{}", report.render());
            if let Some(path) = a.json {
                workflow::write_json(&path, &report)?;
            }
        }
        Command::Sweep(a) => {
            check_cutoffs(&a.cutoff)?;
            let cfg = workflow::SweepConfig {
                cutoffs: a.cutoff,
                sample_sizes: a.sample_size,
                seed: a.seed,
                k: a.k,
                center: a.center,
                eval: a.flags.config(a.metrics),
                alpha: a.alpha,
            };
            let files = workflow::SweepFiles {
                docs: a.docs,
                doc_ids: a.doc_ids,
                queries: a.queries,
                query_ids: a.query_ids,
                qrels: a.qrels,
                fit_docs: a.fit_docs,
            };
            let table = workflow::sweep_files(&files, &cfg)?.to_tsv();
            match a.out {
                Some(path) => std::fs::write(&path, table)
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{table}"),
            }
        }
        Command::Bench(a) => {
            check_cutoffs(&a.cutoff)?;
            let reports = workflow::bench(&workflow::BenchArgs {
                docs: a.docs,
                queries: a.queries,
                model: a.model,
                cutoffs: a.cutoff,
                repetitions: a.repetitions,
                k: a.k,
            })?;
            print!("{}", workflow::render_bench_tsv(&reports));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
