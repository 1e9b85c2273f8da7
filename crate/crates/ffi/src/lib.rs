//! C ABI over `prunerank`.
//!
//! Objects are opaque handles created by `pr_*_new`/`pr_*_fit`/`pr_*_load` and
//! released with the matching `pr_*_free`. Every fallible call returns a
//! [`PrStatus`]; on failure the message is available from
//! [`pr_last_error_message`] on the same thread. Matrices are row-major
//! `double` arrays. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use prunerank::index::{search, EmbeddingIndex, Precision};
use prunerank::stats::wilcoxon_signed_rank;
use prunerank::{io, DenseMatrix, Error, PcaModel, PrunedTransform};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidCutoff = 3,
    ShapeMismatch = 4,
    NonFinite = 5,
    EmptyInput = 6,
    NotConverged = 7,
    Io = 8,
    Format = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for PrStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::EmptyInput => PrStatus::EmptyInput,
            Error::NonFinite => PrStatus::NonFinite,
            Error::ShapeMismatch { .. } => PrStatus::ShapeMismatch,
            Error::NotConverged { .. } => PrStatus::NotConverged,
            Error::InvalidCutoff(_) => PrStatus::InvalidCutoff,
            Error::InvalidArgument(_) => PrStatus::InvalidArgument,
            Error::Io { .. } => PrStatus::Io,
            Error::Format { .. } => PrStatus::Format,
        }
    }
}

/// A fitted PCA model.
pub struct PrPcaModel(PcaModel);

/// The leading columns of a model's basis at one cutoff.
pub struct PrTransform(PrunedTransform);

/// A searchable document matrix; document ids are row numbers.
pub struct PrIndex(EmbeddingIndex);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PrWilcoxon {
    pub n_effective: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub statistic: f64,
    pub p_two_tailed: f64,
    /// 1 when the exact null distribution was used, 0 for the normal approximation.
    pub exact: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(PrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(PrStatus::from(&e), e.to_string())
    }
}

fn fail<T>(status: PrStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            PrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            PrStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return fail(PrStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return fail(PrStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref()
        .map_or_else(|| fail(PrStatus::NullPointer, format!("{what} is null")), Ok)
}

unsafe fn matrix(data: *const f64, rows: usize, cols: usize) -> Result<DenseMatrix, Failure> {
    let len = rows
        .checked_mul(cols)
        .map_or_else(|| fail(PrStatus::InvalidArgument, "matrix size overflows"), Ok)?;
    Ok(DenseMatrix::new(rows, cols, slice(data, len, "matrix data")?.to_vec())?)
}

unsafe fn utf8_path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(PrStatus::NullPointer, "path is null");
    }
    CStr::from_ptr(p)
        .to_str()
        .map_or_else(|_| fail(PrStatus::InvalidArgument, "path is not UTF-8"), Ok)
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(PrStatus::NullPointer, "output handle pointer is null");
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn copy_out(src: &[f64], out: &mut [f64]) -> Result<(), Failure> {
    if out.len() < src.len() {
        return fail(
            PrStatus::BufferTooSmall,
            format!("output buffer holds {} values, {} needed", out.len(), src.len()),
        );
    }
    out[..src.len()].copy_from_slice(src);
    Ok(())
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `pr_*` call on the same thread.
#[no_mangle]
pub extern "C" fn pr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Fits an uncentered PCA on `sample_size` rows drawn (seeded) from the
/// `n x d` matrix `data`. `sample_size == 0` or `>= n` uses every row.
///
/// # Safety
/// `data` must point to `n * d` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn pr_model_fit(
    data: *const f64,
    n: usize,
    d: usize,
    sample_size: usize,
    seed: u64,
    out: *mut *mut PrPcaModel,
) -> PrStatus {
    guard(|| {
        let docs = matrix(data, n, d)?;
        let model = if sample_size == 0 || sample_size >= n {
            prunerank::fit_pca(&docs, "ffi")?
        } else {
            prunerank::fit_pca(&prunerank::sample_rows(&docs, sample_size, seed)?, "ffi")?
        };
        store(out, PrPcaModel(model))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pr_model_load(path: *const c_char, out: *mut *mut PrPcaModel) -> PrStatus {
    guard(|| store(out, PrPcaModel(io::load_pca(utf8_path(path)?)?)))
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn pr_model_save(model: *const PrPcaModel, path: *const c_char) -> PrStatus {
    guard(|| Ok(io::save_pca(utf8_path(path)?, &handle(model, "model")?.0)?))
}

/// Dimension of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pr_model_dim(model: *const PrPcaModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.dim())
}

/// Copies the eigenvalues (descending) into `out[0..dim]`.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pr_model_eigenvalues(model: *const PrPcaModel, out: *mut f64, len: usize) -> PrStatus {
    guard(|| copy_out(handle(model, "model")?.0.eigenvalues(), slice_mut(out, len, "out")?))
}

/// # Safety
/// `model` must be null or a live handle from this library; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pr_model_free(model: *mut PrPcaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Transform keeping `d - round(cutoff * d)` leading components.
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_new(model: *const PrPcaModel, cutoff: f64, out: *mut *mut PrTransform) -> PrStatus {
    guard(|| {
        let t = prunerank::prune_model(&handle(model, "model")?.0, cutoff)?;
        store(out, PrTransform(t))
    })
}

/// # Safety
/// `t` must be null or a live handle from this library; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_free(t: *mut PrTransform) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_dim_in(t: *const PrTransform) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim_in())
}

/// # Safety
/// `t` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_dim_out(t: *const PrTransform) -> usize {
    t.as_ref().map_or(0, |t| t.0.dim_out())
}

/// Fraction of eigenvalue mass kept, or NaN for a null handle.
///
/// # Safety
/// `t` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_retained_variance(t: *const PrTransform) -> f64 {
    t.as_ref().and_then(|t| t.0.retained_variance()).unwrap_or(f64::NAN)
}

/// `out[0..dim_out] = W_m^T q`.
///
/// # Safety
/// `q` must hold `q_len` doubles and `out` `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_query(
    t: *const PrTransform,
    q: *const f64,
    q_len: usize,
    out: *mut f64,
    out_len: usize,
) -> PrStatus {
    guard(|| {
        let projected = prunerank::transform_query(slice(q, q_len, "query")?, &handle(t, "transform")?.0)?;
        copy_out(&projected, slice_mut(out, out_len, "out")?)
    })
}

/// `out = D W_m`, row-major `n x dim_out`.
///
/// # Safety
/// `data` must hold `n * d` doubles and `out` `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pr_transform_corpus(
    t: *const PrTransform,
    data: *const f64,
    n: usize,
    d: usize,
    out: *mut f64,
    out_len: usize,
) -> PrStatus {
    guard(|| {
        let projected = prunerank::transform_corpus(&matrix(data, n, d)?, &handle(t, "transform")?.0)?;
        copy_out(projected.values(), slice_mut(out, out_len, "out")?)
    })
}

fn row_id(i: usize, width: usize) -> String {
    format!("{i:0width$}")
}

/// Builds an index over `n x d` rows. `double_precision != 0` stores 64-bit
/// values, otherwise 32-bit. Row numbers serve as document ids.
///
/// # Safety
/// `data` must hold `n * d` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_index_new(
    data: *const f64,
    n: usize,
    d: usize,
    double_precision: i32,
    out: *mut *mut PrIndex,
) -> PrStatus {
    guard(|| {
        let docs = matrix(data, n, d)?;
        // zero padding keeps the byte-wise tie-break equal to row order
        let width = n.saturating_sub(1).to_string().len();
        let ids = (0..n).map(|i| row_id(i, width)).collect();
        let precision = if double_precision != 0 { Precision::F64 } else { Precision::F32 };
        store(out, PrIndex(EmbeddingIndex::new(ids, &docs, precision, "ffi")?))
    })
}

/// Exact top-`k` by inner product. Writes up to `k` row numbers and scores,
/// best first, and their count to `out_count`.
///
/// # Safety
/// `q` must hold `q_len` doubles; `out_rows` and `out_scores` must each hold
/// `k` elements; `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_index_search(
    index: *const PrIndex,
    q: *const f64,
    q_len: usize,
    k: usize,
    out_rows: *mut usize,
    out_scores: *mut f64,
    out_count: *mut usize,
) -> PrStatus {
    guard(|| {
        let index = &handle(index, "index")?.0;
        if out_count.is_null() {
            return fail(PrStatus::NullPointer, "out_count is null");
        }
        let ranking = search(index, "q", slice(q, q_len, "query")?, k)?;
        let rows = slice_mut(out_rows, k, "out_rows")?;
        let scores = slice_mut(out_scores, k, "out_scores")?;
        for (i, hit) in ranking.hits.iter().enumerate() {
            rows[i] = hit.doc_id.parse().expect("row ids are numeric");
            scores[i] = hit.score;
        }
        *out_count = ranking.hits.len();
        Ok(())
    })
}

/// # Safety
/// `index` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pr_index_len(index: *const PrIndex) -> usize {
    index.as_ref().map_or(0, |i| i.0.len())
}

/// # Safety
/// `index` must be null or a live handle from this library; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pr_index_free(index: *mut PrIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Paired two-tailed Wilcoxon signed-rank test of `x` against `y`.
///
/// # Safety
/// `x` and `y` must each hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pr_wilcoxon(x: *const f64, y: *const f64, n: usize, out: *mut PrWilcoxon) -> PrStatus {
    guard(|| {
        if out.is_null() {
            return fail(PrStatus::NullPointer, "out is null");
        }
        let r = wilcoxon_signed_rank(slice(x, n, "x")?, slice(y, n, "y")?)?;
        *out = PrWilcoxon {
            n_effective: r.n_effective,
            w_plus: r.w_plus,
            w_minus: r.w_minus,
            statistic: r.statistic,
            p_two_tailed: r.p_two_tailed,
            exact: i32::from(r.method == prunerank::stats::PValueMethod::Exact),
        };
        Ok(())
    })
}

/// Null-terminated library version string.
#[no_mangle]
pub extern "C" fn pr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
