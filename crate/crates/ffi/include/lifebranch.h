#ifndef LIFEBRANCH_H
#define LIFEBRANCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LbStatus {
  LB_STATUS_OK = 0,
  LB_STATUS_NULL_POINTER = 1,
  LB_STATUS_INVALID_UTF8 = 2,
  LB_STATUS_CONFIG = 3,
  LB_STATUS_INVALID_MODEL = 4,
  LB_STATUS_NOT_SUPERCRITICAL = 5,
  LB_STATUS_OUT_OF_RANGE = 6,
  LB_STATUS_NUMERICAL = 7,
  LB_STATUS_PANIC = 8,
} LbStatus;

/**
 * Opaque model handle.
 */
typedef struct LbModel LbModel;

/**
 * Limit functionals of the model's test function.
 */
typedef struct LbLimits {
  double a_f;
  double cap_a_f;
  double a_sigma;
  double n1;
  double g_v;
} LbLimits;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a model from a JSON configuration. The handle must be released
 * with [`lb_model_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LbStatus lb_model_from_json(const char *json, struct LbModel **out);

/**
 * Release a handle; null is ignored.
 *
 * # Safety
 * `model` must come from [`lb_model_from_json`] and not be used afterwards.
 */
void lb_model_free(struct LbModel *model);

/**
 * Malthusian parameter and mean total offspring.
 *
 * # Safety
 * Pointers must be valid; `model` must be a live handle.
 */
enum LbStatus lb_malthusian(const struct LbModel *model, double *alpha_tilde, double *m);

/**
 * E⟨X_t, f⟩ at a grid time t within the solver horizon.
 *
 * # Safety
 * Pointers must be valid; `model` must be a live handle.
 */
enum LbStatus lb_mean(const struct LbModel *model, double t, double *out);

/**
 * Extinction probability q.
 *
 * # Safety
 * Pointers must be valid; `model` must be a live handle.
 */
enum LbStatus lb_extinction_prob(const struct LbModel *model, double *q);

/**
 * a(f), A(f), A(σ), n1 and ⟨G, V⟩.
 *
 * # Safety
 * Pointers must be valid; `model` must be a live handle.
 */
enum LbStatus lb_limits(const struct LbModel *model, struct LbLimits *out);

/**
 * φ^f(θ) at the solver horizon for `n` values of θ, written to `out`.
 *
 * # Safety
 * `thetas` and `out` must point to `n` doubles; `model` must be a live handle.
 */
enum LbStatus lb_phi(const struct LbModel *model, const double *thetas, size_t n, double *out);

/**
 * Population at time t of trajectory `index` under master seed `seed`;
 * `truncated` is set when the population exceeded `max_pop`.
 *
 * # Safety
 * Pointers must be valid; `model` must be a live handle.
 */
enum LbStatus lb_simulate_population(const struct LbModel *model,
                                     uint64_t seed,
                                     uint64_t index,
                                     double t,
                                     size_t max_pop,
                                     uint64_t *pop,
                                     bool *truncated);

/**
 * Message of the last failed call on this thread, empty after success.
 * Valid until the next call on the same thread.
 */
const char *lb_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *lb_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIFEBRANCH_H */
