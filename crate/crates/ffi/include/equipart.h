#ifndef EQUIPART_H
#define EQUIPART_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EqpStatus {
  EQP_STATUS_OK = 0,
  EQP_STATUS_NULL_POINTER = 1,
  EQP_STATUS_INVALID_ARGUMENT = 2,
  EQP_STATUS_PARSE = 3,
  EQP_STATUS_VALIDATION = 4,
  EQP_STATUS_UNSOLVED = 5,
  EQP_STATUS_INTERNAL = 6,
  EQP_STATUS_PANIC = 7,
} EqpStatus;

/**
 * Opaque segment function.
 */
typedef struct EqpFunction EqpFunction;

/**
 * Opaque partition witness.
 */
typedef struct EqpWitness EqpWitness;

/**
 * Solver settings. A `band` that is not a positive finite number selects
 * the default band.
 */
typedef struct EqpSolveConfig {
  size_t grid_n;
  size_t grid_m;
  double band;
  double tol;
  size_t max_iter;
  double fd_step;
  size_t max_candidates;
  bool retry;
} EqpSolveConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *eqp_last_error(void);

/**
 * Library version as a static string.
 */
const char *eqp_version(void);

struct EqpSolveConfig eqp_solve_config_default(void);

/**
 * Parses an expression in `a` and `b`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum EqpStatus eqp_function_from_expression(const char *text, struct EqpFunction **out);

/**
 * Built-in family by name. `params_json` is null or a JSON object of
 * string values, e.g. `{"density": "2*t"}` or `{"freq": "1", "phase": "1"}`.
 *
 * # Safety
 * `name` and (when non-null) `params_json` must be NUL-terminated strings;
 * `out` must be writable.
 */
enum EqpStatus eqp_function_from_family(const char *name,
                                        const char *params_json,
                                        struct EqpFunction **out);

/**
 * `f([a, b])`.
 *
 * # Safety
 * `f` must come from this library and not be freed; `out` must be writable.
 */
enum EqpStatus eqp_function_eval(const struct EqpFunction *f, double a, double b, double *out);

/**
 * Checks `f([a, a]) = 0` on a uniform sample of `samples` points.
 *
 * # Safety
 * `f` must come from this library and not be freed.
 */
enum EqpStatus eqp_function_validate_diagonal(const struct EqpFunction *f, size_t samples);

/**
 * # Safety
 * `f` must be null or come from this library, and not be used afterwards.
 */
void eqp_function_free(struct EqpFunction *f);

/**
 * Equipartition of `[0, 1]` into `m` parts. `config` may be null for
 * defaults. A witness that did not reach the tolerance is still returned
 * (check [`eqp_witness_converged`]).
 *
 * # Safety
 * `f` must come from this library; `config` must be null or valid; `out`
 * must be writable.
 */
enum EqpStatus eqp_solve(const struct EqpFunction *f,
                         size_t m,
                         const struct EqpSolveConfig *config,
                         struct EqpWitness **out);

/**
 * # Safety
 * `w` must be null or a live witness.
 */
size_t eqp_witness_parts(const struct EqpWitness *w);

/**
 * Number of interior cuts (`m − 1`).
 *
 * # Safety
 * `w` must be null or a live witness.
 */
size_t eqp_witness_cut_count(const struct EqpWitness *w);

/**
 * Copies the interior cuts into `buf`, which holds `len` values.
 *
 * # Safety
 * `w` must be a live witness; `buf` must be writable for `len` values.
 */
enum EqpStatus eqp_witness_cuts(const struct EqpWitness *w, double *buf, size_t len);

/**
 * Common part value `y` (unscaled), or NaN for null.
 *
 * # Safety
 * `w` must be null or a live witness.
 */
double eqp_witness_value(const struct EqpWitness *w);

/**
 * # Safety
 * `w` must be null or a live witness.
 */
double eqp_witness_max_residual(const struct EqpWitness *w);

/**
 * # Safety
 * `w` must be null or a live witness.
 */
bool eqp_witness_converged(const struct EqpWitness *w);

/**
 * Witness as JSON; free the string with [`eqp_string_free`].
 *
 * # Safety
 * `w` must be a live witness; `out` must be writable.
 */
enum EqpStatus eqp_witness_to_json(const struct EqpWitness *w, char **out);

/**
 * # Safety
 * `w` must be null or come from this library, and not be used afterwards.
 */
void eqp_witness_free(struct EqpWitness *w);

/**
 * Exhaustive grid search (`m ≤ 3`, `grid ≤ 400`) as a JSON report.
 *
 * # Safety
 * `f` must come from this library; `out` must be writable.
 */
enum EqpStatus eqp_oracle_exhaustive_json(const struct EqpFunction *f,
                                          size_t m,
                                          size_t grid,
                                          char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void eqp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EQUIPART_H */
