#ifndef AVGREG_H
#define AVGREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AvgregStatus {
  AVGREG_STATUS_OK = 0,
  AVGREG_STATUS_NULL_POINTER = 1,
  AVGREG_STATUS_INVALID_INPUT = 2,
  AVGREG_STATUS_NUMERICAL = 3,
  AVGREG_STATUS_CONFIGURATION = 4,
  AVGREG_STATUS_DEGENERATE_BATCH = 5,
  AVGREG_STATUS_NON_TERMINATION = 6,
  AVGREG_STATUS_PARSE = 7,
  AVGREG_STATUS_IO = 8,
  AVGREG_STATUS_BUFFER_TOO_SMALL = 9,
  AVGREG_STATUS_PANIC = 10,
} AvgregStatus;

typedef enum AvgregFilterKind {
  AVGREG_FILTER_KIND_TIKHONOV = 0,
  AVGREG_FILTER_KIND_ITERATED_TIKHONOV = 1,
  AVGREG_FILTER_KIND_TSVD = 2,
  AVGREG_FILTER_KIND_LANDWEBER = 3,
} AvgregFilterKind;

typedef enum AvgregDeltaRule {
  AVGREG_DELTA_RULE_INV_SQRT_N = 0,
  AVGREG_DELTA_RULE_SAMPLE_STD = 1,
  /**
   * Uses the `tau` argument.
   */
  AVGREG_DELTA_RULE_LIL = 2,
} AvgregDeltaRule;

typedef enum AvgregRule {
  AVGREG_RULE_DISCREPANCY = 0,
  AVGREG_RULE_DISCREPANCY_EMERGENCY = 1,
  /**
   * `α = 1/√n`.
   */
  AVGREG_RULE_APRIORI_INV_SQRT_N = 2,
} AvgregRule;

/**
 * Opaque singular system.
 */
typedef struct AvgregOperator AvgregOperator;

/**
 * `order` is read for iterated Tikhonov. `relaxation` is the Landweber
 * step; a value ≤ 0 selects `0.9/σ_1²` where an operator is available.
 */
typedef struct AvgregFilter {
  enum AvgregFilterKind kind;
  uint32_t order;
  double relaxation;
} AvgregFilter;

typedef struct AvgregChoice {
  double alpha;
  size_t k;
  double residual;
  bool emergency_triggered;
  double delta_est;
  size_t iterations_evaluated;
} AvgregChoice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *avgreg_last_error(void);

/**
 * Singular system of a dense `rows × cols` matrix.
 *
 * # Safety
 * `data` must point to `rows·cols` readable doubles and `out` must be a
 * writable pointer.
 */
enum AvgregStatus avgreg_operator_from_matrix(const double *data,
                                              size_t rows,
                                              size_t cols,
                                              struct AvgregOperator **out);

/**
 * Diagonal operator with positive, non-increasing singular values.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` must be a
 * writable pointer.
 */
enum AvgregStatus avgreg_operator_diagonal(const double *values,
                                           size_t len,
                                           struct AvgregOperator **out);

/**
 * Releases an operator; null is ignored.
 *
 * # Safety
 * `op` must be null or a handle from this library not yet freed.
 */
void avgreg_operator_free(struct AvgregOperator *op);

/**
 * Number of retained singular values, or 0 for null.
 *
 * # Safety
 * `op` must be null or a live handle.
 */
size_t avgreg_operator_rank(const struct AvgregOperator *op);

/**
 * Row and column dimensions of the operator's matrix.
 *
 * # Safety
 * `op` must be a live handle; `rows` and `cols` must be writable.
 */
enum AvgregStatus avgreg_operator_shape(const struct AvgregOperator *op,
                                        size_t *rows,
                                        size_t *cols);

/**
 * Copies the singular values into `out`, which must hold `rank` doubles.
 *
 * # Safety
 * `op` must be a live handle and `out` must point to `len` writable doubles.
 */
enum AvgregStatus avgreg_operator_singular_values(const struct AvgregOperator *op,
                                                  double *out,
                                                  size_t len);

/**
 * `F_α(λ)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum AvgregStatus avgreg_filter_value(struct AvgregFilter filter,
                                      double alpha,
                                      double lambda,
                                      double *out);

/**
 * Noise-level estimate of `n` samples of length `dim`.
 *
 * # Safety
 * `samples` must point to `n·dim` readable doubles and `out` must be writable.
 */
enum AvgregStatus avgreg_delta_est(const double *samples,
                                   size_t n,
                                   size_t dim,
                                   enum AvgregDeltaRule rule,
                                   double tau,
                                   double *out);

/**
 * Averages `n` measurements of length `rows(op)`, estimates the noise
 * level, chooses `α` and writes the regularized solution (length
 * `cols(op)`) to `x_out`. `q` is the discrepancy grid factor.
 *
 * # Safety
 * `op` must be a live handle, `samples` must point to `n·dim` readable
 * doubles, `x_out` to `x_len` writable doubles, and `choice_out` must be
 * null or writable.
 */
enum AvgregStatus avgreg_solve(const struct AvgregOperator *op,
                               const double *samples,
                               size_t n,
                               size_t dim,
                               struct AvgregFilter filter,
                               enum AvgregRule rule,
                               enum AvgregDeltaRule delta_rule,
                               double tau,
                               double q,
                               double *x_out,
                               size_t x_len,
                               struct AvgregChoice *choice_out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *avgreg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AVGREG_H */
