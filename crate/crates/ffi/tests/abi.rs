use std::ffi::{CStr, CString};
use std::ptr;

use prunerank_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pr_last_error_message()) }.to_string_lossy().into_owned()
}

fn corpus(n: usize, d: usize) -> Vec<f64> {
    // deterministic, full rank, decaying column scales
    (0..n * d)
        .map(|i| {
            let (r, c) = (i / d, i % d);
            ((r * 31 + c * 17) % 23) as f64 / (1.0 + c as f64) - 5.0
        })
        .collect()
}

#[test]
fn fit_transform_search_roundtrip() {
    let (n, d) = (200, 8);
    let data = corpus(n, d);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(pr_model_fit(data.as_ptr(), n, d, 0, 1, &mut model), PrStatus::Ok);
        assert_eq!(pr_model_dim(model), d);
        let mut eig = vec![0.0; d];
        assert_eq!(pr_model_eigenvalues(model, eig.as_mut_ptr(), d), PrStatus::Ok);
        assert!(eig.windows(2).all(|w| w[0] >= w[1]));

        let mut t = ptr::null_mut();
        assert_eq!(pr_transform_new(model, 0.5, &mut t), PrStatus::Ok);
        assert_eq!((pr_transform_dim_in(t), pr_transform_dim_out(t)), (8, 4));
        let rv = pr_transform_retained_variance(t);
        assert!(rv > 0.5 && rv <= 1.0);

        let mut projected = vec![0.0; n * 4];
        assert_eq!(pr_transform_corpus(t, data.as_ptr(), n, d, projected.as_mut_ptr(), projected.len()), PrStatus::Ok);
        let q = &data[..d];
        let mut q_hat = [0.0; 4];
        assert_eq!(pr_transform_query(t, q.as_ptr(), d, q_hat.as_mut_ptr(), 4), PrStatus::Ok);

        let mut index = ptr::null_mut();
        assert_eq!(pr_index_new(projected.as_ptr(), n, 4, 1, &mut index), PrStatus::Ok);
        assert_eq!(pr_index_len(index), n);
        let (mut rows, mut scores, mut count) = ([0usize; 5], [0.0; 5], 0usize);
        assert_eq!(
            pr_index_search(index, q_hat.as_ptr(), 4, 5, rows.as_mut_ptr(), scores.as_mut_ptr(), &mut count),
            PrStatus::Ok
        );
        assert_eq!(count, 5);
        assert!(scores.windows(2).all(|w| w[0] >= w[1]));
        let direct: f64 = projected[rows[0] * 4..rows[0] * 4 + 4].iter().zip(&q_hat).map(|(a, b)| a * b).sum();
        assert!((direct - scores[0]).abs() < 1e-12);

        pr_index_free(index);
        pr_transform_free(t);
        pr_model_free(model);
    }
}

#[test]
fn model_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.pcam").to_str().unwrap()).unwrap();
    let data = corpus(50, 5);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(pr_model_fit(data.as_ptr(), 50, 5, 30, 7, &mut model), PrStatus::Ok);
        assert_eq!(pr_model_save(model, path.as_ptr()), PrStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(pr_model_load(path.as_ptr(), &mut loaded), PrStatus::Ok);
        let (mut a, mut b) = ([0.0; 5], [0.0; 5]);
        pr_model_eigenvalues(model, a.as_mut_ptr(), 5);
        pr_model_eigenvalues(loaded, b.as_mut_ptr(), 5);
        assert_eq!(a, b);
        pr_model_free(model);
        pr_model_free(loaded);

        let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(pr_model_load(missing.as_ptr(), &mut out), PrStatus::Io);
        assert!(out.is_null());
        assert!(last_error().contains("none"));
    }
}

#[test]
fn error_codes() {
    let data = corpus(10, 3);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(pr_model_fit(ptr::null(), 10, 3, 0, 0, &mut model), PrStatus::NullPointer);
        assert_eq!(pr_model_fit(data.as_ptr(), 0, 3, 0, 0, &mut model), PrStatus::EmptyInput);
        let bad = [1.0, f64::NAN, 2.0];
        assert_eq!(pr_model_fit(bad.as_ptr(), 1, 3, 0, 0, &mut model), PrStatus::NonFinite);
        assert!(!last_error().is_empty());

        assert_eq!(pr_model_fit(data.as_ptr(), 10, 3, 0, 0, &mut model), PrStatus::Ok);
        assert!(last_error().is_empty());
        let mut t = ptr::null_mut();
        assert_eq!(pr_transform_new(model, 1.0, &mut t), PrStatus::InvalidCutoff);
        assert_eq!(pr_transform_new(ptr::null(), 0.5, &mut t), PrStatus::NullPointer);
        assert_eq!(pr_transform_new(model, 0.0, &mut t), PrStatus::Ok);
        let q = [1.0, 2.0];
        let mut out = [0.0; 3];
        assert_eq!(pr_transform_query(t, q.as_ptr(), 2, out.as_mut_ptr(), 3), PrStatus::ShapeMismatch);
        let mut small = [0.0; 1];
        assert_eq!(pr_transform_query(t, data.as_ptr(), 3, small.as_mut_ptr(), 1), PrStatus::BufferTooSmall);
        assert_eq!(pr_model_eigenvalues(model, small.as_mut_ptr(), 1), PrStatus::BufferTooSmall);
        assert!(pr_transform_retained_variance(ptr::null()).is_nan());
        assert_eq!(pr_model_dim(ptr::null()), 0);
        pr_transform_free(t);
        pr_model_free(model);
        pr_model_free(ptr::null_mut());
    }
}

#[test]
fn wilcoxon_matches_core() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [0.0; 5];
    let mut out = PrWilcoxon::default();
    unsafe {
        assert_eq!(pr_wilcoxon(x.as_ptr(), y.as_ptr(), 5, &mut out), PrStatus::Ok);
        assert_eq!(out.p_two_tailed, 0.0625);
        assert_eq!((out.n_effective, out.statistic, out.exact), (5, 0.0, 1));
        assert_eq!(pr_wilcoxon(x.as_ptr(), y.as_ptr(), 0, &mut out), PrStatus::InvalidArgument);
        assert_eq!(pr_wilcoxon(x.as_ptr(), y.as_ptr(), 5, ptr::null_mut()), PrStatus::NullPointer);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(pr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
