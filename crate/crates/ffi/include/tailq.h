#ifndef TAILQ_H
#define TAILQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Asymptote families available through [`tailq_curve_new`].
 */
typedef enum TailqCurveKind {
  /**
   * Sojourn of a customer arriving to an empty system; `constant` is the
   * prefactor `E(1 + X_{K-1})`.
   */
  TAILQ_CURVE_KIND_FIRST_CUSTOMER_SOJOURN = 0,
  /**
   * Its regularly varying form `C L(x) / x^shape`; same `constant`.
   */
  TAILQ_CURVE_KIND_FIRST_CUSTOMER_SOJOURN_RV = 1,
  /**
   * Customer-stationary sojourn; `constant` is ignored.
   */
  TAILQ_CURVE_KIND_STATIONARY_SOJOURN = 2,
  /**
   * Busy-period length; `constant` is `E tau^H`.
   */
  TAILQ_CURVE_KIND_BUSY_PERIOD = 3,
  /**
   * Customers per busy period; `constant` is `E tau^H`.
   */
  TAILQ_CURVE_KIND_BUSY_COUNT = 4,
} TailqCurveKind;

/**
 * Result of every fallible call.
 */
typedef enum TailqStatus {
  TAILQ_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  TAILQ_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  TAILQ_STATUS_INVALID_UTF8 = 2,
  /**
   * A numeric argument or model parameter is out of range.
   */
  TAILQ_STATUS_INVALID_PARAMETER = 3,
  /**
   * A distribution string could not be parsed.
   */
  TAILQ_STATUS_PARSE = 4,
  /**
   * The model has traffic intensity >= 1.
   */
  TAILQ_STATUS_UNSTABLE = 5,
  /**
   * An experiment configuration was rejected.
   */
  TAILQ_STATUS_CONFIG = 6,
  /**
   * The simulation failed (event budget, dropped replications).
   */
  TAILQ_STATUS_SIMULATION = 7,
  /**
   * Reading or writing report files failed.
   */
  TAILQ_STATUS_IO = 8,
  /**
   * A Rust panic was caught at the boundary; this is a bug.
   */
  TAILQ_STATUS_PANIC = 9,
} TailqStatus;

/**
 * An asymptote curve bound to one model.
 */
typedef struct TailqCurve TailqCurve;

/**
 * A validated model and its constants.
 */
typedef struct TailqModel TailqModel;

/**
 * Closed-form constants of a model.
 */
typedef struct TailqConstants {
  /**
   * Arrival rate.
   */
  double lambda;
  /**
   * Mean inter-arrival time.
   */
  double a;
  /**
   * Mean service time.
   */
  double b;
  double p;
  double q;
  /**
   * Branching rate `p + lambda b`.
   */
  double r;
  /**
   * Traffic intensity `lambda b / q`.
   */
  double rho;
  /**
   * Mean compounded service `b / q`.
   */
  double b_h;
  /**
   * Limit of the fluid multipliers.
   */
  double m_inf;
  /**
   * Nonzero when `rho < 1`.
   */
  bool stable;
} TailqConstants;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on the calling thread, or NULL
 * if the last call succeeded. Valid until the next call on this thread.
 */
const char *tailq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tailq_version(void);

/**
 * Builds a model from distribution strings such as `"exp(rate=0.2)"` and
 * `"pareto(shape=2.5, scale=0.6)"`. Unstable models are accepted; curves
 * and experiments on them fail with [`TailqStatus::Unstable`].
 *
 * # Safety
 * `arrival` and `service` are NUL-terminated strings; `out` is valid for writes.
 */
enum TailqStatus tailq_model_new(const char *arrival,
                                 const char *service,
                                 double feedback_p,
                                 struct TailqModel **out);

/**
 * Releases a model. NULL is ignored.
 *
 * # Safety
 * `model` is NULL or a handle from [`tailq_model_new`] not yet freed.
 */
void tailq_model_free(struct TailqModel *model);

/**
 * # Safety
 * `model` is a live handle; `out` is valid for writes.
 */
enum TailqStatus tailq_model_constants(const struct TailqModel *model, struct TailqConstants *out);

/**
 * Fluid multiplier `m_k`: the queue ahead of a tagged customer at its
 * `k`-th return, per unit of a big service.
 *
 * # Safety
 * `model` is a live handle; `out` is valid for writes.
 */
enum TailqStatus tailq_model_fluid_multiplier(const struct TailqModel *model,
                                              uint32_t k,
                                              double *out);

/**
 * Service-time tail `P(S > x)`.
 *
 * # Safety
 * `model` is a live handle; `out` is valid for writes.
 */
enum TailqStatus tailq_service_tail(const struct TailqModel *model, double x, double *out);

/**
 * Integrated service tail `(1/b) * integral_x^inf P(S > u) du`.
 *
 * # Safety
 * `model` is a live handle; `out` is valid for writes.
 */
enum TailqStatus tailq_service_integrated_tail(const struct TailqModel *model,
                                               double x,
                                               double *out);

/**
 * Builds an asymptote curve for `model`. `constant` is the family's free
 * constant (see [`TailqCurveKind`]); pass NaN to use its closed form, which
 * exists for Poisson arrivals only.
 *
 * # Safety
 * `model` is a live handle; `out` is valid for writes.
 */
enum TailqStatus tailq_curve_new(const struct TailqModel *model,
                                 enum TailqCurveKind kind,
                                 double constant,
                                 struct TailqCurve **out);

/**
 * Releases a curve. NULL is ignored.
 *
 * # Safety
 * `curve` is NULL or a handle from [`tailq_curve_new`] not yet freed.
 */
void tailq_curve_free(struct TailqCurve *curve);

/**
 * Evaluates a curve at `n` thresholds `xs`, writing `n` values to `out`.
 *
 * # Safety
 * `curve` is a live handle; `xs` and `out` point to `n` doubles each.
 */
enum TailqStatus tailq_curve_eval(const struct TailqCurve *curve,
                                  const double *xs,
                                  size_t n,
                                  double *out);

/**
 * Runs an experiment described by TOML text (the format written by
 * `tailq init`). `out_dir`, if not NULL, overrides the config's output
 * directory. `all_passed`, if not NULL, receives whether every built-in
 * check passed.
 *
 * # Safety
 * `config_toml` is a NUL-terminated string; `out_dir` is NULL or one;
 * `all_passed` is NULL or valid for writes.
 */
enum TailqStatus tailq_run_experiment(const char *config_toml,
                                      const char *out_dir,
                                      bool *all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAILQ_H */
