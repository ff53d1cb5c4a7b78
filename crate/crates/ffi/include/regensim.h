#ifndef REGENSIM_H
#define REGENSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_INVALID_ARGUMENT = 2,
  RS_STATUS_TRIAL_BUDGET_EXCEEDED = 3,
  RS_STATUS_ZERO_WEIGHT = 4,
  RS_STATUS_NO_CONVERGENCE = 5,
  RS_STATUS_INDEFINITE_HESSIAN = 6,
  RS_STATUS_DATA_INTEGRITY = 7,
  RS_STATUS_NUMERICAL = 8,
  RS_STATUS_PANIC = 9,
} RsStatus;

// Opaque probit model on the Lupus data, with its posterior mode.
typedef struct RsProbit RsProbit;

// Opaque random stream: one independent, reproducible sequence per
// `(seed, stream_id)`.
typedef struct RsStream RsStream;

// Ratio estimate from cycle pairs with its variance constants and interval.
typedef struct RsEstimate {
  double value;
  // Sample variance of V − q̂W.
  double s2;
  // Variance constant for intervals indexed by cycle count.
  double eta2;
  // Variance constant for intervals indexed by simulated time.
  double sigma2;
  double ci_lo;
  double ci_hi;
} RsEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call into this library on the same
// thread.
const char *rs_last_error(void);

struct RsStream *rs_stream_new(uint64_t seed, uint64_t stream_id);

// # Safety
// `stream` must come from [`rs_stream_new`] and not have been freed; null is
// ignored.
void rs_stream_free(struct RsStream *stream);

// A uniform draw on (0, 1), mainly for checking stream reproducibility.
//
// # Safety
// `stream` and `out` must be valid pointers.
enum RsStatus rs_stream_uniform(struct RsStream *stream, double *out);

// `n` independent RRS outputs at threshold `t` for a Gamma(shape, 1) target
// and an Exp(rate) proposal. `total_draws`, when not null, receives the
// number of proposal draws spent.
//
// # Safety
// `out` must point to `n` writable doubles.
enum RsStatus rs_gamma_exp_rrs(struct RsStream *stream,
                               double shape,
                               double rate,
                               double t,
                               size_t n,
                               double *out,
                               uint64_t *total_draws);

// CDF at `y` of the RRS output at threshold `t` for the Gamma(2,1) target
// with Exp(1) proposal.
double rs_gamma_exp_rrs_cdf(double t, double y);

// Ratio `Σv / Σw` over `n ≥ 2` cycles. With `t > 0` the interval is indexed
// by simulated time `t`, otherwise by the cycle count.
//
// # Safety
// `v` and `w` must point to `n` doubles; `out` must be valid.
enum RsStatus rs_ratio_estimate(const double *v,
                                const double *w,
                                size_t n,
                                double t,
                                double level,
                                struct RsEstimate *out);

// Bias bound for `|h| ≤ k` from the first three cycle-length moments.
//
// # Safety
// `out` must be valid.
enum RsStatus rs_bias_bound(double k, double mu, double mu2, double mu3, double t, double *out);

// TV distance between the residual life at `t` of a zero-delayed
// Gamma(2, λ) renewal process and its stationary law.
//
// # Safety
// `out` must be valid.
enum RsStatus rs_gamma2_tv(double lambda, double t, double *out);

// Build the Lupus probit model and find its mode. `prior_variance ≤ 0`
// selects the flat prior, otherwise independent N(0, prior_variance).
//
// # Safety
// `out` must be valid; on success it receives a handle to free with
// [`rs_probit_free`].
enum RsStatus rs_probit_lupus_new(double prior_variance, struct RsProbit **out);

// # Safety
// `model` must come from [`rs_probit_lupus_new`]; null is ignored.
void rs_probit_free(struct RsProbit *model);

// Number of coefficients.
//
// # Safety
// `model` must be a live handle or null (which yields 0).
size_t rs_probit_dim(const struct RsProbit *model);

// Copy the posterior mode into `mode`, `dim` doubles.
//
// # Safety
// `mode` must point to `dim` writable doubles.
enum RsStatus rs_probit_mode(const struct RsProbit *model, double *mode, size_t dim);

// Unnormalized log posterior at `beta`.
//
// # Safety
// `beta` must point to `dim` doubles; `out` must be valid.
enum RsStatus rs_probit_log_posterior(const struct RsProbit *model,
                                      const double *beta,
                                      size_t dim,
                                      double *out);

// `n` posterior draws by sub-sampled RRS at per-sample threshold `t`, with
// the Laplace proposal inflated by `alpha2` and target scale `e^xi`. Draws
// are written row-major into `out`, `n·dim` doubles.
//
// # Safety
// `out` must point to `n·dim` writable doubles.
enum RsStatus rs_probit_sample_rrs(const struct RsProbit *model,
                                   struct RsStream *stream,
                                   double xi,
                                   double alpha2,
                                   double t,
                                   size_t n,
                                   double *out,
                                   uint64_t *total_draws);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REGENSIM_H */
