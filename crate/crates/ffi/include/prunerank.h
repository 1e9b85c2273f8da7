#ifndef PRUNERANK_H
#define PRUNERANK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PrStatus {
  PR_STATUS_OK = 0,
  PR_STATUS_NULL_POINTER = 1,
  PR_STATUS_INVALID_ARGUMENT = 2,
  PR_STATUS_INVALID_CUTOFF = 3,
  PR_STATUS_SHAPE_MISMATCH = 4,
  PR_STATUS_NON_FINITE = 5,
  PR_STATUS_EMPTY_INPUT = 6,
  PR_STATUS_NOT_CONVERGED = 7,
  PR_STATUS_IO = 8,
  PR_STATUS_FORMAT = 9,
  PR_STATUS_BUFFER_TOO_SMALL = 10,
  PR_STATUS_PANIC = 11,
} PrStatus;

/**
 * A searchable document matrix; document ids are row numbers.
 */
typedef struct PrIndex PrIndex;

/**
 * A fitted PCA model.
 */
typedef struct PrPcaModel PrPcaModel;

/**
 * The leading columns of a model's basis at one cutoff.
 */
typedef struct PrTransform PrTransform;

typedef struct PrWilcoxon {
  size_t n_effective;
  double w_plus;
  double w_minus;
  double statistic;
  double p_two_tailed;
  /**
   * 1 when the exact null distribution was used, 0 for the normal approximation.
   */
  int32_t exact;
} PrWilcoxon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `pr_*` call on the same thread.
 */
const char *pr_last_error_message(void);

/**
 * Fits an uncentered PCA on `sample_size` rows drawn (seeded) from the
 * `n x d` matrix `data`. `sample_size == 0` or `>= n` uses every row.
 *
 * # Safety
 * `data` must point to `n * d` doubles and `out` to writable storage.
 */
enum PrStatus pr_model_fit(const double *data,
                           size_t n,
                           size_t d,
                           size_t sample_size,
                           uint64_t seed,
                           struct PrPcaModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PrStatus pr_model_load(const char *path, struct PrPcaModel **out);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
enum PrStatus pr_model_save(const struct PrPcaModel *model, const char *path);

/**
 * Dimension of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or come from this library.
 */
size_t pr_model_dim(const struct PrPcaModel *model);

/**
 * Copies the eigenvalues (descending) into `out[0..dim]`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum PrStatus pr_model_eigenvalues(const struct PrPcaModel *model, double *out, size_t len);

/**
 * # Safety
 * `model` must be null or a live handle from this library; it is invalid afterwards.
 */
void pr_model_free(struct PrPcaModel *model);

/**
 * Transform keeping `d - round(cutoff * d)` leading components.
 *
 * # Safety
 * `model` must come from this library and `out` be writable.
 */
enum PrStatus pr_transform_new(const struct PrPcaModel *model,
                               double cutoff,
                               struct PrTransform **out);

/**
 * # Safety
 * `t` must be null or a live handle from this library; it is invalid afterwards.
 */
void pr_transform_free(struct PrTransform *t);

/**
 * # Safety
 * `t` must be null or come from this library.
 */
size_t pr_transform_dim_in(const struct PrTransform *t);

/**
 * # Safety
 * `t` must be null or come from this library.
 */
size_t pr_transform_dim_out(const struct PrTransform *t);

/**
 * Fraction of eigenvalue mass kept, or NaN for a null handle.
 *
 * # Safety
 * `t` must be null or come from this library.
 */
double pr_transform_retained_variance(const struct PrTransform *t);

/**
 * `out[0..dim_out] = W_m^T q`.
 *
 * # Safety
 * `q` must hold `q_len` doubles and `out` `out_len` writable doubles.
 */
enum PrStatus pr_transform_query(const struct PrTransform *t,
                                 const double *q,
                                 size_t q_len,
                                 double *out,
                                 size_t out_len);

/**
 * `out = D W_m`, row-major `n x dim_out`.
 *
 * # Safety
 * `data` must hold `n * d` doubles and `out` `out_len` writable doubles.
 */
enum PrStatus pr_transform_corpus(const struct PrTransform *t,
                                  const double *data,
                                  size_t n,
                                  size_t d,
                                  double *out,
                                  size_t out_len);

/**
 * Builds an index over `n x d` rows. `double_precision != 0` stores 64-bit
 * values, otherwise 32-bit. Row numbers serve as document ids.
 *
 * # Safety
 * `data` must hold `n * d` doubles and `out` be writable.
 */
enum PrStatus pr_index_new(const double *data,
                           size_t n,
                           size_t d,
                           int32_t double_precision,
                           struct PrIndex **out);

/**
 * Exact top-`k` by inner product. Writes up to `k` row numbers and scores,
 * best first, and their count to `out_count`.
 *
 * # Safety
 * `q` must hold `q_len` doubles; `out_rows` and `out_scores` must each hold
 * `k` elements; `out_count` must be writable.
 */
enum PrStatus pr_index_search(const struct PrIndex *index,
                              const double *q,
                              size_t q_len,
                              size_t k,
                              size_t *out_rows,
                              double *out_scores,
                              size_t *out_count);

/**
 * # Safety
 * `index` must be null or come from this library.
 */
size_t pr_index_len(const struct PrIndex *index);

/**
 * # Safety
 * `index` must be null or a live handle from this library; it is invalid afterwards.
 */
void pr_index_free(struct PrIndex *index);

/**
 * Paired two-tailed Wilcoxon signed-rank test of `x` against `y`.
 *
 * # Safety
 * `x` and `y` must each hold `n` doubles and `out` be writable.
 */
enum PrStatus pr_wilcoxon(const double *x, const double *y, size_t n, struct PrWilcoxon *out);

/**
 * Null-terminated library version string.
 */
const char *pr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRUNERANK_H */
