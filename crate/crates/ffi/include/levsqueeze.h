#ifndef LEVSQUEEZE_H
#define LEVSQUEEZE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsqStatus {
  LSQ_STATUS_OK = 0,
  LSQ_STATUS_NULL_POINTER = 1,
  LSQ_STATUS_INVALID_ARGUMENT = 2,
  LSQ_STATUS_RESOURCE_LIMIT = 3,
  LSQ_STATUS_NUMERICAL = 4,
  LSQ_STATUS_FIT_FAILURE = 5,
  LSQ_STATUS_IO = 6,
  LSQ_STATUS_PANIC = 7,
} LsqStatus;

/**
 * Experiment configuration.
 */
typedef struct LsqConfig LsqConfig;

/**
 * Simulated position traces.
 */
typedef struct LsqEnsemble LsqEnsemble;

/**
 * Fitted `ω₂` and `η` of a squeezing curve.
 */
typedef struct LsqFitResult {
  double omega2;
  double eta;
  double omega2_std;
  double eta_std;
  double correlation;
  double residual_norm;
  size_t iterations;
  /**
   * Non-zero when `η` converged onto a bound of `(0, 1]`.
   */
  int32_t eta_at_bound;
} LsqFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into the library from the same thread.
 */
const char *lsq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lsq_version(void);

/**
 * Ideal single-pulse squeezing `λ_max` in dB.
 */
enum LsqStatus lsq_lambda_max(double omega1, double omega2, double *out_db);

/**
 * Squeezing parameter `r = ½ ln(ω₂/ω₁)`.
 */
enum LsqStatus lsq_squeeze_r(double omega1, double omega2, double *out_r);

/**
 * Pulse length `π/(2ω₂)` giving maximal squeezing, s.
 */
enum LsqStatus lsq_optimal_tau(double omega1, double omega2, double *out_tau);

/**
 * Quadrature map of one pulse of length `tau`, row-major into `out_m[4]`.
 */
enum LsqStatus lsq_pulse_map(double omega1, double omega2, double tau, double *out_m);

/**
 * Noiseless squeezing of one pulse of length `tau`, dB.
 */
enum LsqStatus lsq_squeezing_db(double omega1, double omega2, double tau, double *out_db);

/**
 * Squeezing of one pulse with dephasing `eta` on a thermal state with
 * occupancy `n1`, dB.
 */
enum LsqStatus lsq_model_lambda(double tau,
                                double omega1,
                                double omega2,
                                double eta,
                                double n1,
                                double *out_db);

/**
 * Covariance (vacuum = 1) after one dephased pulse on a thermal state with
 * occupancy `n1`, row-major into `out_sigma[4]`.
 */
enum LsqStatus lsq_propagate_pulse(double n1,
                                   double omega1,
                                   double omega2,
                                   double tau,
                                   double eta,
                                   double *out_sigma);

/**
 * Fits `ω₂` and `η` to `n` measured points. `sigmas` may be null for an
 * unweighted fit.
 */
enum LsqStatus lsq_fit_squeezing(const double *taus,
                                 const double *lambdas,
                                 const double *sigmas,
                                 size_t n,
                                 double omega1,
                                 double omega2_init,
                                 double eta_init,
                                 struct LsqFitResult *out_fit);

/**
 * Parses a TOML configuration; missing keys take their defaults.
 */
enum LsqStatus lsq_config_from_toml(const char *text, struct LsqConfig **out_cfg);

/**
 * Loads a TOML or JSON configuration file.
 */
enum LsqStatus lsq_config_load(const char *path, struct LsqConfig **out_cfg);

/**
 * Overrides the trace count and master seed, then revalidates.
 */
enum LsqStatus lsq_config_set_run(struct LsqConfig *cfg, size_t n_traces, uint64_t seed);

/**
 * Reference and pulse trap frequencies of a configuration, rad/s.
 */
enum LsqStatus lsq_config_trap(const struct LsqConfig *cfg, double *out_omega1, double *out_omega2);

/**
 * Releases a configuration. Null is ignored.
 */
void lsq_config_free(struct LsqConfig *cfg);

/**
 * Simulates the configured ensemble, including measurement noise.
 */
enum LsqStatus lsq_simulate(const struct LsqConfig *cfg, struct LsqEnsemble **out_ens);

/**
 * Trace count, samples per trace and sampling interval of an ensemble.
 */
enum LsqStatus lsq_ensemble_shape(const struct LsqEnsemble *ens,
                                  size_t *out_traces,
                                  size_t *out_samples,
                                  double *out_dt);

/**
 * Copies trace `index` (metres) into `buf`, which holds `len` doubles and
 * must fit the whole trace.
 */
enum LsqStatus lsq_ensemble_trace(const struct LsqEnsemble *ens,
                                  size_t index,
                                  double *buf,
                                  size_t len);

/**
 * Releases an ensemble. Null is ignored.
 */
void lsq_ensemble_free(struct LsqEnsemble *ens);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVSQUEEZE_H */
