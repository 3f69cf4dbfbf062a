#ifndef RBDSDE_H
#define RBDSDE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define RBDSDE_ENGINE_TREE 0

#define RBDSDE_ENGINE_REGRESSION 1

#define RBDSDE_SELECT_MINIMAL 0

#define RBDSDE_SELECT_MAXIMAL 1

typedef enum RbdsdeStatus {
  RBDSDE_STATUS_OK = 0,
  RBDSDE_STATUS_NULL_POINTER = 1,
  RBDSDE_STATUS_INVALID_ARGUMENT = 2,
  RBDSDE_STATUS_UNKNOWN_PROBLEM = 3,
  RBDSDE_STATUS_NOT_TREE = 4,
  RBDSDE_STATUS_CAPACITY = 5,
  RBDSDE_STATUS_NOT_LIPSCHITZ = 6,
  /**
   * Contraction, fixed-point or regression failure.
   */
  RBDSDE_STATUS_NUMERICAL = 7,
  RBDSDE_STATUS_NON_MONOTONE = 8,
  RBDSDE_STATUS_PRECONDITION = 9,
  RBDSDE_STATUS_UNSUPPORTED = 10,
  RBDSDE_STATUS_HYPOTHESIS_REFUSED = 11,
  RBDSDE_STATUS_OUT_OF_RANGE = 12,
  RBDSDE_STATUS_PANIC = 99,
} RbdsdeStatus;

/**
 * Sampled or enumerated increments.
 */
typedef struct RbdsdeNoise RbdsdeNoise;

/**
 * Problem definition; create with [`rbdsde_problem_builtin`].
 */
typedef struct RbdsdeProblem RbdsdeProblem;

/**
 * Discrete solution `(Y, Z, K)`.
 */
typedef struct RbdsdeSolution RbdsdeSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rbdsde_version(void);

/**
 * Message of the last failure on this thread, or NULL.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *rbdsde_last_error(void);

/**
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RbdsdeStatus rbdsde_problem_builtin(const char *name, struct RbdsdeProblem **out);

/**
 * # Safety
 * `problem` must come from this library and not be freed twice.
 */
void rbdsde_problem_free(struct RbdsdeProblem *problem);

/**
 * Full Rademacher tree with `4^steps` paths on `[0, horizon]`, `d = l = 1`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RbdsdeStatus rbdsde_noise_tree(double horizon, uintptr_t steps, struct RbdsdeNoise **out);

/**
 * Gaussian increments; identical for a given seed on any thread count.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RbdsdeStatus rbdsde_noise_gaussian(double horizon,
                                        uintptr_t steps,
                                        uintptr_t paths,
                                        uintptr_t dim_w,
                                        uintptr_t dim_b,
                                        uint64_t seed,
                                        struct RbdsdeNoise **out);

/**
 * # Safety
 * `noise` must come from this library and not be freed twice.
 */
void rbdsde_noise_free(struct RbdsdeNoise *noise);

/**
 * Direct solve for a generator with a declared Lipschitz constant.
 *
 * `degree` is ignored by the tree engine.
 *
 * # Safety
 * Handles must be live; `out` must be a valid pointer.
 */
enum RbdsdeStatus rbdsde_solve(const struct RbdsdeProblem *problem,
                               const struct RbdsdeNoise *noise,
                               uint32_t engine_kind,
                               uint32_t degree,
                               struct RbdsdeSolution **out);

/**
 * Monotone scheme towards the minimal or maximal solution.
 *
 * `tol <= 0` and `max_n == 0` keep the engine defaults. `converged` may be
 * NULL.
 *
 * # Safety
 * Handles must be live; `out` must be a valid pointer.
 */
enum RbdsdeStatus rbdsde_iterate(const struct RbdsdeProblem *problem,
                                 const struct RbdsdeNoise *noise,
                                 uint32_t engine_kind,
                                 uint32_t degree,
                                 uint32_t selection,
                                 double tol,
                                 uintptr_t max_n,
                                 struct RbdsdeSolution **out,
                                 bool *converged);

/**
 * # Safety
 * `solution` must come from this library and not be freed twice.
 */
void rbdsde_solution_free(struct RbdsdeSolution *solution);

/**
 * # Safety
 * `solution` must be live; the out pointers may be NULL.
 */
enum RbdsdeStatus rbdsde_solution_shape(const struct RbdsdeSolution *solution,
                                        uintptr_t *steps,
                                        uintptr_t *paths,
                                        uintptr_t *dim_w);

/**
 * # Safety
 * `solution` must be live and `out` valid.
 */
enum RbdsdeStatus rbdsde_solution_y(const struct RbdsdeSolution *solution,
                                    uintptr_t step,
                                    uintptr_t path,
                                    double *out);

/**
 * Cumulative push `K` at `(step, path)`.
 *
 * # Safety
 * `solution` must be live and `out` valid.
 */
enum RbdsdeStatus rbdsde_solution_k(const struct RbdsdeSolution *solution,
                                    uintptr_t step,
                                    uintptr_t path,
                                    double *out);

/**
 * Path average of `Y` at `step`.
 *
 * # Safety
 * `solution` must be live and `out` valid.
 */
enum RbdsdeStatus rbdsde_solution_mean_y(const struct RbdsdeSolution *solution,
                                         uintptr_t step,
                                         double *out);

/**
 * Copy `Z` at `(step, path)` into `buf`, which must hold `dim_w` values.
 *
 * # Safety
 * `solution` must be live and `buf` writable for `len` doubles.
 */
enum RbdsdeStatus rbdsde_solution_z(const struct RbdsdeSolution *solution,
                                    uintptr_t step,
                                    uintptr_t path,
                                    double *buf,
                                    uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBDSDE_H */
