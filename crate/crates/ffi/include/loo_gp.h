#ifndef LOO_GP_H
#define LOO_GP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LOO_GP_KERNEL_SQUARED_EXPONENTIAL 0

#define LOO_GP_KERNEL_MATERN52 1

#define LOO_GP_RULE_PRESS 0

#define LOO_GP_RULE_LOG_DENSITY 1

#define LOO_GP_RULE_CRPS 2

#define LOO_GP_CRITERION_PRESS 0

#define LOO_GP_CRITERION_LOG_DENSITY 1

#define LOO_GP_CRITERION_CRPS 2

#define LOO_GP_CRITERION_MLE 3

// Result code of every fallible call.
typedef enum LooGpStatus {
  LOO_GP_STATUS_OK = 0,
  LOO_GP_STATUS_NULL_POINTER = 1,
  LOO_GP_STATUS_INVALID_INPUT = 2,
  LOO_GP_STATUS_DIMENSION_MISMATCH = 3,
  LOO_GP_STATUS_SINGULAR_COVARIANCE = 4,
  LOO_GP_STATUS_DEGENERATE_SCORE = 5,
  LOO_GP_STATUS_DOMAIN = 6,
  LOO_GP_STATUS_ESTIMATION_FAILED = 7,
  LOO_GP_STATUS_NUMERICAL = 8,
  LOO_GP_STATUS_BUFFER_SIZE = 9,
  LOO_GP_STATUS_PANIC = 10,
} LooGpStatus;

// Design matrix and observations.
typedef struct LooGpDataset LooGpDataset;

// Outcome of [`loo_gp_estimate`].
typedef struct LooGpFit LooGpFit;

// Kernel family and covariance parameters.
typedef struct LooGpParams LooGpParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call into this library from the same thread.
const char *loo_gp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *loo_gp_version(void);

// Copies an `n × d` row-major design `x` and `n` observations `z`.
//
// # Safety
// `x` must point to `n * d` doubles, `z` to `n` doubles, `out` to writable storage.
enum LooGpStatus loo_gp_dataset_new(const double *x,
                                    size_t n,
                                    size_t d,
                                    const double *z,
                                    struct LooGpDataset **out);

// # Safety
// `dataset` must be null or a handle from [`loo_gp_dataset_new`] not yet freed.
void loo_gp_dataset_free(struct LooGpDataset *dataset);

// Number of observations, or 0 for a null handle.
//
// # Safety
// `dataset` must be null or a live handle.
size_t loo_gp_dataset_len(const struct LooGpDataset *dataset);

// Builds kernel parameters. `length_scales` holds `d` entries.
//
// # Safety
// `length_scales` must point to `d` doubles and `out` to writable storage.
enum LooGpStatus loo_gp_params_new(uint32_t kernel,
                                   double process_variance,
                                   const double *length_scales,
                                   size_t d,
                                   double noise_variance,
                                   bool estimate_noise,
                                   struct LooGpParams **out);

// # Safety
// `params` must be null or a handle from [`loo_gp_params_new`] not yet freed.
void loo_gp_params_free(struct LooGpParams *params);

// Number of free parameters `q`, or 0 for a null handle.
//
// # Safety
// `params` must be null or a live handle.
size_t loo_gp_params_len(const struct LooGpParams *params);

// Writes `θ = (process variance, length scales[, noise variance])` into `theta`.
//
// # Safety
// `params` must be a live handle and `theta` must point to `len` doubles.
enum LooGpStatus loo_gp_params_get(const struct LooGpParams *params, double *theta, size_t len);

// Leave-one-out criterion of `rule` and its gradient in θ (`grad_len` = q).
//
// # Safety
// Handles must be live; `value` must be writable and `grad` must point to `grad_len` doubles.
enum LooGpStatus loo_gp_criterion_with_gradient(const struct LooGpParams *params,
                                                const struct LooGpDataset *dataset,
                                                uint32_t scoring_rule,
                                                double *value,
                                                double *grad,
                                                size_t grad_len);

// Log marginal likelihood and its gradient in θ (`grad_len` = q).
//
// # Safety
// As for [`loo_gp_criterion_with_gradient`].
enum LooGpStatus loo_gp_lml_gradient(const struct LooGpParams *params,
                                     const struct LooGpDataset *dataset,
                                     double *value,
                                     double *grad,
                                     size_t grad_len);

// Leave-one-out predictive means and variances, `n` entries each.
//
// # Safety
// Handles must be live; `mu` and `sigma2` must each point to `n` doubles.
enum LooGpStatus loo_gp_loo_moments(const struct LooGpParams *params,
                                    const struct LooGpDataset *dataset,
                                    double *mu,
                                    double *sigma2,
                                    size_t n);

// Multi-start estimation of θ. `noise_variance` is held fixed unless
// `estimate_noise` is set.
//
// # Safety
// `dataset` must be live and `out` writable.
enum LooGpStatus loo_gp_estimate(const struct LooGpDataset *dataset,
                                 uint32_t criterion_code,
                                 uint32_t kernel,
                                 size_t n_starts,
                                 uint64_t seed,
                                 double noise_variance,
                                 bool estimate_noise,
                                 struct LooGpFit **out);

// # Safety
// `fit` must be null or a handle from [`loo_gp_estimate`] not yet freed.
void loo_gp_fit_free(struct LooGpFit *fit);

// Copies the estimated parameters into a new params handle.
//
// # Safety
// `fit` must be live and `out` writable.
enum LooGpStatus loo_gp_fit_params(const struct LooGpFit *fit, struct LooGpParams **out);

// Criterion value at the estimate and whether the chosen start converged.
//
// # Safety
// `fit` must be live; `value` and `converged` must be writable.
enum LooGpStatus loo_gp_fit_summary(const struct LooGpFit *fit,
                                    double *value,
                                    bool *converged,
                                    size_t *iterations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOO_GP_H */
