#ifndef CHLAB_H
#define CHLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChlabStatus {
  CHLAB_STATUS_OK = 0,
  CHLAB_STATUS_NULL_POINTER = 1,
  CHLAB_STATUS_INVALID_ARGUMENT = 2,
  CHLAB_STATUS_CONFIG = 3,
  CHLAB_STATUS_NEWTON_DIVERGED = 4,
  CHLAB_STATUS_BOUND_VIOLATION = 5,
  CHLAB_STATUS_DOMAIN_VIOLATION = 6,
  CHLAB_STATUS_IO = 7,
  CHLAB_STATUS_BUFFER_TOO_SMALL = 8,
  CHLAB_STATUS_PANIC = 9,
  CHLAB_STATUS_OTHER = 10,
} ChlabStatus;

/**
 * Opaque simulation handle.
 */
typedef struct ChlabSimulation ChlabSimulation;

/**
 * Energies of the current state.
 */
typedef struct ChlabEnergy {
  double psi;
  double psi_hat;
  double psi_tilde;
} ChlabEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length. Passing
 * a null `buf` only queries the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t chlab_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chlab_version(void);

/**
 * Builds a simulation from configuration text (`key = value` lines) and its
 * initial data. Unknown keys are rejected.
 *
 * # Safety
 * `config` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum ChlabStatus chlab_simulation_new(const char *config, struct ChlabSimulation **out);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must come from [`chlab_simulation_new`] and not be used afterwards.
 */
void chlab_simulation_free(struct ChlabSimulation *sim);

/**
 * Integrates up to `t_end` with the configured step. `steps` (may be null)
 * receives the number of accepted steps. On failure the state is unchanged.
 *
 * # Safety
 * `sim` must be a live handle; `steps` null or valid for writes.
 */
enum ChlabStatus chlab_simulation_advance(struct ChlabSimulation *sim,
                                          double t_end,
                                          uint64_t *steps);

/**
 * # Safety
 * `sim` must be a live handle; `out` valid for writes.
 */
enum ChlabStatus chlab_simulation_time(const struct ChlabSimulation *sim, double *out);

/**
 * # Safety
 * `sim` must be a live handle; `out` valid for writes.
 */
enum ChlabStatus chlab_simulation_node_count(const struct ChlabSimulation *sim, size_t *out);

/**
 * Copies the nodal values of `u` and `v` (row-major, last axis fastest)
 * into buffers of `len` doubles each.
 *
 * # Safety
 * `sim` must be a live handle; `u` and `v` valid for `len` writes.
 */
enum ChlabStatus chlab_simulation_copy_fields(const struct ChlabSimulation *sim,
                                              double *u,
                                              double *v,
                                              size_t len);

/**
 * # Safety
 * `sim` must be a live handle; `out` valid for writes.
 */
enum ChlabStatus chlab_simulation_energy(const struct ChlabSimulation *sim,
                                         struct ChlabEnergy *out);

/**
 * # Safety
 * `sim` must be a live handle; `mean_u` and `mean_v` valid for writes.
 */
enum ChlabStatus chlab_simulation_means(const struct ChlabSimulation *sim,
                                        double *mean_u,
                                        double *mean_v);

/**
 * `L^2` norms of the mean-free stationary residuals of the current state.
 *
 * # Safety
 * `sim` must be a live handle; `res_u` and `res_v` valid for writes.
 */
enum ChlabStatus chlab_simulation_stationary_residual(const struct ChlabSimulation *sim,
                                                      double *res_u,
                                                      double *res_v);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHLAB_H */
