#ifndef CHASM_H
#define CHASM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum ChasmStatus {
  CHASM_STATUS_OK = 0,
  CHASM_STATUS_NULL_POINTER = 1,
  CHASM_STATUS_INVALID_PARAMETER = 2,
  CHASM_STATUS_DIMENSION_MISMATCH = 3,
  CHASM_STATUS_NON_FINITE = 4,
  CHASM_STATUS_NOT_READY = 5,
  /**
   * Eigen solver failure, ill-conditioned covariance or a negative statistic.
   */
  CHASM_STATUS_NUMERICAL = 6,
  CHASM_STATUS_PANIC = 7,
} ChasmStatus;

/**
 * Opaque detector handle.
 */
typedef struct ChasmDetector ChasmDetector;

/**
 * Detector parameters. Obtain defaults from [`chasm_config_default`].
 */
typedef struct ChasmConfig {
  /**
   * Forgetting factor in (0, 1].
   */
  double rho;
  size_t rank;
  /**
   * MEWMA smoothing weight in (0, 1].
   */
  double alpha;
  double threshold;
  uint64_t grace;
  uint64_t burn_in;
  size_t lag;
  /**
   * Prior precision of the operator estimate; zero or negative selects the default.
   */
  double epsilon;
  double ridge;
  /**
   * Non-zero to restart after each alarm.
   */
  uint8_t restart;
  /**
   * Zero for cumulative moments, otherwise the weight of the newest
   * velocity under exponential forgetting.
   */
  double moment_weight;
} ChasmConfig;

/**
 * Output of one detector step.
 */
typedef struct ChasmRecord {
  uint64_t t;
  /**
   * Non-zero when `statistic` holds a value.
   */
  uint8_t has_statistic;
  double statistic;
  uint8_t alarm;
  uint64_t segment;
} ChasmRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *chasm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chasm_version(void);

/**
 * Write the default configuration into `out`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `ChasmConfig`.
 */
enum ChasmStatus chasm_config_default(struct ChasmConfig *out);

/**
 * Create a detector for `dim`-dimensional observations.
 *
 * # Safety
 * `config` must be null or point to a valid `ChasmConfig`; `out` must point
 * to writable storage for a handle pointer.
 */
enum ChasmStatus chasm_detector_new(size_t dim,
                                    const struct ChasmConfig *config,
                                    struct ChasmDetector **out);

/**
 * Feed one observation of `len` values (must equal the detector's
 * dimension) and write the step's record into `out`.
 *
 * # Safety
 * `detector` must come from [`chasm_detector_new`] and not be freed; `x`
 * must point to `len` readable doubles; `out` must be null or writable.
 */
enum ChasmStatus chasm_detector_step(struct ChasmDetector *detector,
                                     const double *x,
                                     size_t len,
                                     struct ChasmRecord *out);

/**
 * Dimension the detector was created with; zero for a null handle.
 *
 * # Safety
 * `detector` must be null or a live handle.
 */
size_t chasm_detector_dim(const struct ChasmDetector *detector);

/**
 * Release a detector. Null is ignored.
 *
 * # Safety
 * `detector` must be null or a handle from [`chasm_detector_new`] that has
 * not been freed.
 */
void chasm_detector_free(struct ChasmDetector *detector);

/**
 * Solve the `n × n` linear assignment problem for a row-major `cost`
 * matrix. `assignment[i]` receives the column matched to row `i`; ties
 * resolve to the lexicographically smallest assignment.
 *
 * # Safety
 * `cost` must point to `n * n` readable doubles and `assignment` to `n`
 * writable `size_t` values.
 */
enum ChasmStatus chasm_solve_assignment(const double *cost,
                                        size_t n,
                                        size_t *assignment,
                                        double *objective);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHASM_H */
