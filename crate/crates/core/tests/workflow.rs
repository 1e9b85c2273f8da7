use std::fs;
use std::path::{Path, PathBuf};

use prunerank::eval::{EvalConfig, Metric};
use prunerank::io;
use prunerank::synth::SynthSpec;
use prunerank::workflow::{
    self, FitArgs, GeneratedFiles, PruneArgs, SearchArgs, SweepConfig, SweepFiles,
};
use prunerank::Error;
use tempfile::TempDir;

fn small_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_docs: 600,
        n_queries: 30,
        dim: 24,
        intrinsic_rank: 6,
        signal_decay: 0.9,
        noise_sigma: 0.05,
        seed,
        latent_seed: None,
        k_relevant: 5,
    }
}

fn corpus(dir: &Path) -> GeneratedFiles {
    workflow::generate(&small_spec(3), dir).unwrap()
}

fn fit_to(files: &GeneratedFiles, out: PathBuf, sample_size: usize) -> PathBuf {
    workflow::fit(&FitArgs {
        docs: files.docs.clone(),
        sample_size,
        seed: 9,
        center: false,
        source_tag: Some("test".into()),
        out_model: out.clone(),
    })
    .unwrap();
    out
}

fn search_args(files: &GeneratedFiles, out: PathBuf) -> SearchArgs {
    SearchArgs {
        index_vectors: files.docs.clone(),
        index_ids: files.doc_ids.clone(),
        queries: files.queries.clone(),
        query_ids: files.query_ids.clone(),
        model: None,
        cutoff: None,
        pretransformed: false,
        k: 100,
        tag: Some("run".into()),
        out_run: out,
    }
}

#[test]
fn generate_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (fa, fb) = (corpus(a.path()), corpus(b.path()));
    for (x, y) in [(&fa.docs, &fb.docs), (&fa.queries, &fb.queries), (&fa.qrels, &fb.qrels), (&fa.doc_ids, &fb.doc_ids)] {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

#[test]
fn fit_twice_gives_identical_model_files() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let a = fit_to(&files, dir.path().join("a.pcam"), 400);
    let b = fit_to(&files, dir.path().join("b.pcam"), 400);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn oversized_sample_is_clamped() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let summary = workflow::fit(&FitArgs {
        docs: files.docs.clone(),
        sample_size: 1_000_000,
        seed: 1,
        center: false,
        source_tag: None,
        out_model: dir.path().join("m.pcam"),
    })
    .unwrap();
    assert_eq!(summary.fitted_on, 600);
    assert!(summary.render().starts_with("dim\t24\n"));
}

#[test]
fn prune_file_size_and_identity() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let model = fit_to(&files, dir.path().join("m.pcam"), 600);
    let prune = |c: f64, name: &str| {
        workflow::prune_transform(&PruneArgs {
            docs: files.docs.clone(),
            model: model.clone(),
            cutoff: c,
            out_vectors: dir.path().join(name),
        })
    };
    let half = prune(0.5, "half.fvecs").unwrap();
    assert_eq!(half.dim_out, 12);
    assert_eq!(half.bytes_written, 600 * (4 + 4 * 12));

    // c = 0 is a rotation; rotating back recovers the input within f32 rounding
    prune(0.0, "zero.fvecs").unwrap();
    let rotated = io::read_vectors(dir.path().join("zero.fvecs")).unwrap();
    let basis = io::load_pca(&model).unwrap().basis().transpose();
    let back = prunerank::project(&rotated, &basis).unwrap();
    let original = io::read_vectors(&files.docs).unwrap();
    for (a, b) in back.values().iter().zip(original.values()) {
        assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
    }

    assert!(matches!(prune(1.0, "bad.fvecs"), Err(Error::InvalidCutoff(_))));
}

#[test]
fn full_and_zero_cutoff_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let model = fit_to(&files, dir.path().join("m.pcam"), 600);
    let full = dir.path().join("full.run");
    let zero = dir.path().join("zero.run");
    workflow::search(&search_args(&files, full.clone())).unwrap();
    workflow::search(&SearchArgs {
        model: Some(model),
        cutoff: Some(0.0),
        ..search_args(&files, zero.clone())
    })
    .unwrap();
    assert_eq!(fs::read(full).unwrap(), fs::read(zero).unwrap());
}

#[test]
fn pretransformed_index_matches_in_memory_transform() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let model = fit_to(&files, dir.path().join("m.pcam"), 600);
    let pruned = dir.path().join("p.fvecs");
    workflow::prune_transform(&PruneArgs {
        docs: files.docs.clone(),
        model: model.clone(),
        cutoff: 0.5,
        out_vectors: pruned.clone(),
    })
    .unwrap();
    let on_disk = dir.path().join("disk.run");
    let in_memory = dir.path().join("mem.run");
    workflow::search(&SearchArgs {
        index_vectors: pruned,
        model: Some(model.clone()),
        cutoff: Some(0.5),
        pretransformed: true,
        k: 10,
        ..search_args(&files, on_disk.clone())
    })
    .unwrap();
    workflow::search(&SearchArgs {
        model: Some(model),
        cutoff: Some(0.5),
        k: 10,
        ..search_args(&files, in_memory.clone())
    })
    .unwrap();
    let a = io::read_run(&on_disk).unwrap();
    let b = io::read_run(&in_memory).unwrap();
    // the on-disk index is rounded to f32; scores agree closely, rankings almost always
    let mut same_top = 0;
    for (ra, rb) in a.iter().zip(&b) {
        assert!(ra.hits.len() <= 10);
        same_top += usize::from(ra.hits[0].doc_id == rb.hits[0].doc_id);
        for (ha, hb) in ra.hits.iter().zip(&rb.hits) {
            if ha.doc_id == hb.doc_id {
                assert!((ha.score - hb.score).abs() < 1e-4);
            }
        }
    }
    assert!(same_top >= a.len() - 1);
}

#[test]
fn search_errors() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let mut args = search_args(&files, dir.path().join("r.run"));
    args.index_ids = dir.path().join("missing.ids");
    assert!(matches!(workflow::search(&args), Err(Error::Io { .. })));

    let args = SearchArgs {
        cutoff: Some(0.5),
        ..search_args(&files, dir.path().join("r.run"))
    };
    assert!(matches!(workflow::search(&args), Err(Error::InvalidArgument(_))));
}

#[test]
fn out_of_domain_dimension_mismatch() {
    let dir = TempDir::new().unwrap();
    let a = workflow::generate(&small_spec(1), &dir.path().join("a")).unwrap();
    let mut spec_b = small_spec(2);
    spec_b.dim = 20;
    let b = workflow::generate(&spec_b, &dir.path().join("b")).unwrap();
    let model = fit_to(&a, dir.path().join("a.pcam"), 600);
    let err = workflow::prune_transform(&PruneArgs {
        docs: b.docs.clone(),
        model,
        cutoff: 0.5,
        out_vectors: dir.path().join("x.fvecs"),
    })
    .unwrap_err();
    assert!(matches!(err, Error::ShapeMismatch { .. }), "{err}");
}

#[test]
fn eval_and_compare() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let run = dir.path().join("full.run");
    workflow::search(&search_args(&files, run.clone())).unwrap();
    let cfg = EvalConfig::default();
    let reports = workflow::eval(&run, &files.qrels, &cfg).unwrap();
    let tsv = workflow::render_eval_tsv(&reports);
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0], "metric\tquery_id\tvalue");
    assert_eq!(lines.len(), 1 + 3 * 30 + 3);
    assert!(lines.last().unwrap().starts_with("MRR@10\tall\t"));

    let json = dir.path().join("eval.json");
    workflow::write_json(&json, &reports).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 3);

    let same = workflow::compare(&run, &run, &files.qrels, Metric::Ndcg(10), &cfg, 0.05).unwrap();
    assert_eq!(same.wilcoxon.p_two_tailed, 1.0);
    assert!(!same.significant);

    // a run over different query ids shares nothing with the first
    let other = dir.path().join("other.run");
    let text = fs::read_to_string(&run).unwrap().replace("q", "x");
    fs::write(&other, text).unwrap();
    assert!(workflow::compare(&run, &other, &files.qrels, Metric::Ap, &cfg, 0.05).is_err());
}

#[test]
fn sweep_table_shape_and_exactness() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let cfg = SweepConfig {
        cutoffs: vec![0.0, 0.25, 0.5, 0.75],
        sample_sizes: vec![100, 600],
        seed: 5,
        k: 100,
        center: false,
        eval: EvalConfig::default(),
        alpha: 0.05,
    };
    let sweep_files = SweepFiles {
        docs: files.docs.clone(),
        doc_ids: files.doc_ids.clone(),
        queries: files.queries.clone(),
        query_ids: files.query_ids.clone(),
        qrels: files.qrels.clone(),
        fit_docs: None,
    };
    let table = workflow::sweep_files(&sweep_files, &cfg).unwrap();
    assert_eq!(table.grid_rows().len(), 8);
    let baseline = table.baseline();
    assert!(baseline.cutoff.is_none() && baseline.cells.iter().all(|c| c.p_value.is_none()));
    for row in table.grid_rows() {
        for (cell, base) in row.cells.iter().zip(&baseline.cells) {
            let p = cell.p_value.unwrap();
            assert_eq!(cell.significant, Some(p < 0.05));
            if row.cutoff == Some(0.0) {
                assert_eq!(cell.mean, base.mean);
                assert_eq!(p, 1.0);
            }
        }
    }
    let tsv = table.to_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 8);
    assert!(lines[1].starts_with("–\t–\t24\t–\t"));
    assert!(lines[0].contains("nDCG@10_sig"));

    // deterministic end to end
    assert_eq!(workflow::sweep_files(&sweep_files, &cfg).unwrap(), table);

    let ood = SweepFiles {
        fit_docs: Some(workflow::generate(&small_spec(4), &dir.path().join("b")).unwrap().docs),
        ..sweep_files
    };
    assert_eq!(workflow::sweep_files(&ood, &cfg).unwrap().grid_rows().len(), 8);
}

#[test]
fn bench_reports_full_and_pruned() {
    let dir = TempDir::new().unwrap();
    let files = corpus(dir.path());
    let model = fit_to(&files, dir.path().join("m.pcam"), 600);
    let reports = workflow::bench(&workflow::BenchArgs {
        docs: files.docs.clone(),
        queries: files.queries.clone(),
        model: Some(model),
        cutoffs: vec![0.5],
        repetitions: 3,
        k: 10,
    })
    .unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!((reports[0].dim, reports[1].dim), (24, 12));
    assert!(reports[1].transformed);
    assert_eq!(workflow::render_bench_tsv(&reports).lines().count(), 3);
}
