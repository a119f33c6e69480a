#ifndef BOOLEAN_FLOW_H
#define BOOLEAN_FLOW_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum {
  BF_STATUS_OK = 0,
  BF_STATUS_NULL_POINTER = 1,
  BF_STATUS_INVALID_ARGUMENT = 2,
  BF_STATUS_DOMAIN = 3,
  BF_STATUS_NUMERICAL = 4,
  BF_STATUS_CLASSIFICATION = 5,
  BF_STATUS_DATA = 6,
  BF_STATUS_IO = 7,
  // The requested quantity is not available for this result (e.g. no LRT interval).
  BF_STATUS_UNAVAILABLE = 8,
  BF_STATUS_PANIC = 9,
} BfStatus;

// Result of a rate estimator.
typedef struct BfEstimate BfEstimate;

// Observed clump lengths plus the known mean segment length.
typedef struct BfSample BfSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next library call on this thread.
const char *bf_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *bf_version(void);

// Builds a sample from `n` clump lengths. Lengths `<= mu (1 + singleton_eps)`
// are classified as singletons.
//
// # Safety
// `lengths` must point to `n` readable doubles; `out` must be writable.
BfStatus bf_sample_new(const double *lengths,
                       size_t n,
                       double mu,
                       double singleton_eps,
                       BfSample **out);

// Attaches `n` inter-clump spacings to a sample (used by the MLE when requested).
//
// # Safety
// `sample` must be a live handle; `spacings` must point to `n` readable doubles.
BfStatus bf_sample_set_spacings(BfSample *sample, const double *spacings, size_t n);

// Number of clumps, mean length and unbiased length variance.
//
// # Safety
// `sample` must be a live handle; any non-null out-pointer must be writable.
BfStatus bf_sample_stats(const BfSample *sample, size_t *n, double *ybar, double *s2y);

// # Safety
// `sample` must be null or a handle from [`bf_sample_new`] not yet freed.
void bf_sample_free(BfSample *sample);

// Unconditional clump-length density for deterministic segments of length `t0`,
// excluding the point mass at `t0`.
//
// # Safety
// `out` must be writable.
BfStatus bf_clump_density(double y, double lambda, double t0, double *out);

// Moment estimator of the rate.
//
// # Safety
// `sample` must be a live handle; `out` must be writable.
BfStatus bf_m_estimate(const BfSample *sample, BfEstimate **out);

// Maximum-likelihood estimator of the rate under deterministic segments.
// A nonzero `use_spacings` includes the spacings attached to the sample.
//
// # Safety
// `sample` must be a live handle; `out` must be writable.
BfStatus bf_mle(const BfSample *sample, int32_t use_spacings, BfEstimate **out);

// # Safety
// `est` must be a live handle; `out` must be writable.
BfStatus bf_estimate_lambda(const BfEstimate *est, double *out);

// Model-based standard error; `BF_STATUS_UNAVAILABLE` when not computed.
//
// # Safety
// `est` must be a live handle; `out` must be writable.
BfStatus bf_estimate_se_dsl(const BfEstimate *est, double *out);

// Sandwich standard error; `BF_STATUS_UNAVAILABLE` when not computed.
//
// # Safety
// `est` must be a live handle; `out` must be writable.
BfStatus bf_estimate_se_g(const BfEstimate *est, double *out);

// 95% Wald interval from the sandwich standard error.
//
// # Safety
// `est` must be a live handle; `lo` and `hi` must be writable.
BfStatus bf_estimate_ci_wald(const BfEstimate *est, double *lo, double *hi);

// 95% likelihood-ratio interval (MLE only).
//
// # Safety
// `est` must be a live handle; `lo` and `hi` must be writable.
BfStatus bf_estimate_ci_lrt(const BfEstimate *est, double *lo, double *hi);

// # Safety
// `est` must be null or a handle from an estimator call not yet freed.
void bf_estimate_free(BfEstimate *est);

// Total-flow estimate `n e^{lambda t0}`.
//
// # Safety
// `out` must be writable.
BfStatus bf_a_hat_1(double lambda, size_t n, double t0, double *out);

// Expected number of particles in a clump of length `y`.
//
// # Safety
// `out` must be writable.
BfStatus bf_conditional_order_mean(double y, double lambda, double t0, double *out);

// Bayes total-flow estimate: the sum over clumps of the expected particle count
// given the clump length. A nonzero `use_interp` evaluates the conditional mean
// from a grid interpolant (step `t0 / 20`).
//
// # Safety
// `sample` must be a live handle; `out` must be writable.
BfStatus bf_a_hat_bayes(const BfSample *sample,
                        double lambda,
                        double t0,
                        int32_t use_interp,
                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOOLEAN_FLOW_H */
