#ifndef GAUGE_ARB_H
#define GAUGE_ARB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GaCompleteness {
  GA_COMPLETENESS_COMPLETE = 0,
  GA_COMPLETENESS_INCOMPLETE = 1,
  /**
   * Empty kernel.
   */
  GA_COMPLETENESS_NO_KERNEL = 2,
} GaCompleteness;

typedef enum GaStatus {
  GA_STATUS_OK = 0,
  GA_STATUS_NULL_POINTER = 1,
  GA_STATUS_INVALID_UTF8 = 2,
  GA_STATUS_CONFIG_INVALID = 3,
  GA_STATUS_INVALID_INPUT = 4,
  GA_STATUS_NUMERICAL = 5,
  GA_STATUS_OUT_OF_RANGE = 6,
  GA_STATUS_PANIC = 7,
} GaStatus;

typedef enum GaVerdict {
  GA_VERDICT_ARBITRAGE_FREE = 0,
  GA_VERDICT_ARBITRAGE = 1,
  GA_VERDICT_INCONCLUSIVE = 2,
} GaVerdict;

/**
 * Deterministic market scenario.
 */
typedef struct GaScenario GaScenario;

/**
 * Low spectrum of one scenario's connection Laplacian.
 */
typedef struct GaSpectrum GaSpectrum;

/**
 * Outcome of the zero-curvature range test.
 */
typedef struct GaZcResult {
  double residual;
  double tolerance;
  size_t rank;
  bool is_zc;
} GaZcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *ga_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * call into the library from the same thread.
 */
const char *ga_last_error_message(void);

/**
 * Module-qualified code of the last failure on this thread, or null.
 */
const char *ga_last_error_code(void);

/**
 * Parses a scenario JSON document with explicit gauges.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GaStatus ga_scenario_from_json(const char *json, struct GaScenario **out);

/**
 * Releases a scenario; null is ignored.
 *
 * # Safety
 * `s` must come from [`ga_scenario_from_json`] and not be used afterwards.
 */
void ga_scenario_free(struct GaScenario *s);

/**
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum GaStatus ga_scenario_asset_count(const struct GaScenario *s, size_t *out);

/**
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum GaStatus ga_scenario_time_count(const struct GaScenario *s, size_t *out);

/**
 * Portfolio deflator `D^x` at time index `t`.
 *
 * # Safety
 * `x` must point to `n` doubles, `out` to one.
 */
enum GaStatus ga_scenario_deflator(const struct GaScenario *s,
                                   const double *x,
                                   size_t n,
                                   size_t t,
                                   double *out);

/**
 * Portfolio short rate `r^x` at time index `t`.
 *
 * # Safety
 * `x` must point to `n` doubles, `out` to one.
 */
enum GaStatus ga_scenario_short_rate(const struct GaScenario *s,
                                     const double *x,
                                     size_t n,
                                     size_t t,
                                     double *out);

/**
 * Range test `alpha - correction / 2 + r in range(sigma)` for `n` assets and
 * `k` Brownian drivers; `sigma` is row-major `n x k`, `correction` may be null.
 *
 * # Safety
 * Array pointers must hold the stated lengths, `out` must be valid.
 */
enum GaStatus ga_zc_test(const double *alpha,
                         const double *sigma,
                         const double *r,
                         const double *correction,
                         size_t n,
                         size_t k,
                         struct GaZcResult *out);

/**
 * Computes the `k` smallest Laplacian eigenvalues on a grid of `grid_nodes`
 * per axis. `epsilon_kernel <= 0` selects the default threshold.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_compute(const struct GaScenario *s,
                                  size_t grid_nodes,
                                  size_t k,
                                  double tol,
                                  double epsilon_kernel,
                                  struct GaSpectrum **out);

/**
 * # Safety
 * `sp` must come from [`ga_spectrum_compute`] and not be used afterwards.
 */
void ga_spectrum_free(struct GaSpectrum *sp);

/**
 * # Safety
 * `sp` must be a live spectrum handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_len(const struct GaSpectrum *sp, size_t *out);

/**
 * Eigenvalue `i` in ascending order.
 *
 * # Safety
 * `sp` must be a live spectrum handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_eigenvalue(const struct GaSpectrum *sp, size_t i, double *out);

/**
 * # Safety
 * `sp` must be a live spectrum handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_verdict(const struct GaSpectrum *sp, enum GaVerdict *out);

/**
 * # Safety
 * `sp` must be a live spectrum handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_completeness(const struct GaSpectrum *sp, enum GaCompleteness *out);

/**
 * # Safety
 * `sp` must be a live spectrum handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_kernel_dim(const struct GaSpectrum *sp, size_t *out);

/**
 * # Safety
 * `sp` must be a live spectrum handle and `out` a valid pointer.
 */
enum GaStatus ga_spectrum_epsilon(const struct GaSpectrum *sp, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAUGE_ARB_H */
