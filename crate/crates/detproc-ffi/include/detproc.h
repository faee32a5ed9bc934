#ifndef DETPROC_H
#define DETPROC_H

/* Generated by cbindgen from detproc-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum DpStatus {
  DP_STATUS_OK = 0,
  DP_STATUS_NULL_POINTER = 1,
  DP_STATUS_INVALID_PARAMETER = 2,
  DP_STATUS_DOMAIN_VIOLATION = 3,
  DP_STATUS_SINGULAR_CONFIGURATION = 4,
  DP_STATUS_NUMERICAL_FAILURE = 5,
} DpStatus;

/**
 * Opaque discretized-kernel handle.
 */
typedef struct DpDiscretized DpDiscretized;

/**
 * Opaque kernel handle.
 */
typedef struct DpKernel DpKernel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message raised on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *dp_last_error_message(void);

/**
 * Create the sine kernel.
 */
enum DpStatus dp_kernel_sine(struct DpKernel **out);

/**
 * Create the Bessel kernel with exponent `s > -1`.
 */
enum DpStatus dp_kernel_bessel(double s, struct DpKernel **out);

/**
 * Create a weighted Christoffel–Darboux kernel: `family` 0 = Hermite,
 * 1 = Jacobi with exponent `s` (ignored for Hermite).
 */
enum DpStatus dp_kernel_cd(int32_t family, size_t n, double s, struct DpKernel **out);

/**
 * Create a scaled kernel: the bulk-scaled Hermite kernel (`family` 0) or the
 * hard-edge-scaled Jacobi kernel (`family` 1, exponent `s`).
 */
enum DpStatus dp_kernel_scaled(int32_t family, size_t n, double s, struct DpKernel **out);

/**
 * Reduce a kernel at `len` distinct conditioning points (the Palm kernel).
 */
enum DpStatus dp_kernel_palm_reduce(const struct DpKernel *kernel,
                                    const double *points,
                                    size_t len,
                                    struct DpKernel **out);

/**
 * Evaluate `K(x, y)` with domain checking.
 */
enum DpStatus dp_kernel_eval(const struct DpKernel *kernel, double x, double y, double *out);

/**
 * Diagonal value `K(x, x)`.
 */
enum DpStatus dp_kernel_diagonal(const struct DpKernel *kernel, double x, double *out);

/**
 * Correlation function `det K(p_i, p_j)`.
 */
enum DpStatus dp_correlation_function(const struct DpKernel *kernel,
                                      const double *points,
                                      size_t len,
                                      double *out);

void dp_kernel_free(struct DpKernel *kernel);

/**
 * Log of the truncated multiplicative functional
 * `Σ_{|x|<=R} 2(log|x-p| - log|x-q|)` over `points`, optionally with the
 * rational regularizer's compensator for `kernel` (pass `use_lambda0 = 1`).
 */
enum DpStatus dp_log_psi(const struct DpKernel *kernel,
                         int32_t use_lambda0,
                         double p,
                         double q,
                         const double *points,
                         size_t len,
                         double radius,
                         double *out);

/**
 * Discretize a kernel on `grid_n` midpoints of `[lo, hi]`.
 */
enum DpStatus dp_discretize(const struct DpKernel *kernel,
                            double lo,
                            double hi,
                            size_t grid_n,
                            struct DpDiscretized **out);

/**
 * Expected particle number of the discretized process.
 */
enum DpStatus dp_discretized_expected_points(const struct DpDiscretized *dk, double *out);

/**
 * Draw one determinantal sample into `buf` (capacity `cap`); the number of
 * points is written to `written`. Fails with `InvalidParameter` if the
 * sample does not fit.
 */
enum DpStatus dp_dpp_sample(const struct DpDiscretized *dk,
                            uint64_t seed,
                            uint64_t stream,
                            double *buf,
                            size_t cap,
                            size_t *written);

void dp_discretized_free(struct DpDiscretized *dk);

/**
 * Monte Carlo estimate of `rho(p)/rho(q)` by Palm sampling; `map_sqrt = 1`
 * samples in the `x = t²` coordinates (recommended for Bessel kernels).
 * Writes the ratio and its standard error.
 */
enum DpStatus dp_rho_estimate(const struct DpKernel *kernel,
                              int32_t use_lambda0,
                              double p,
                              double q,
                              double window_lo,
                              double window_hi,
                              size_t grid_n,
                              int32_t map_sqrt,
                              size_t n_samples,
                              uint64_t seed,
                              double *out_ratio,
                              double *out_std_error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DETPROC_H */
