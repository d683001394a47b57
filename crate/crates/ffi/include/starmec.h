/* Generated by cbindgen from crates/ffi/src/lib.rs. */

#ifndef STARMEC_H
#define STARMEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StarmecProtocol {
  STARMEC_PROTOCOL_ES = 0,
  STARMEC_PROTOCOL_MS = 1,
  STARMEC_PROTOCOL_TS = 2,
  /**
   * Reflect-only plus transmit-only surface; needs an even element count.
   */
  STARMEC_PROTOCOL_CONVENTIONAL = 3,
} StarmecProtocol;

typedef enum StarmecStatus {
  STARMEC_STATUS_OK = 0,
  STARMEC_STATUS_NULL_POINTER = 1,
  STARMEC_STATUS_INVALID_ARGUMENT = 2,
  STARMEC_STATUS_DIMENSION = 3,
  STARMEC_STATUS_DOMAIN = 4,
  STARMEC_STATUS_INFEASIBLE = 5,
  STARMEC_STATUS_UNBOUNDED = 6,
  STARMEC_STATUS_NOT_CONVERGED = 7,
  STARMEC_STATUS_CONFIG = 8,
  STARMEC_STATUS_IO = 9,
  STARMEC_STATUS_PANIC = 10,
} StarmecStatus;

/**
 * A system plus one channel realization.
 */
typedef struct StarmecInstance StarmecInstance;

typedef struct StarmecSolution StarmecSolution;

/**
 * System constants in SI units. Every UE gets the same cycles per bit.
 */
typedef struct StarmecSystem {
  size_t ues;
  size_t elements;
  double bandwidth;
  double noise_power;
  double eta;
  double p_max;
  double f_max;
  double kappa;
  double period;
  double ap_power;
  double cycles_per_bit;
  double epsilon;
  double delta;
  size_t max_iterations;
} StarmecSystem;

/**
 * Scalar results of a solve.
 */
typedef struct StarmecSummary {
  double total_bits;
  double tau0;
  /**
   * Reflection and transmission slots (time switching only, else 0).
   */
  double tau_r;
  double tau_t;
  size_t iterations;
  bool converged;
  double max_residual;
} StarmecSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call on the same thread.
 */
const char *starmec_last_error(void);

/**
 * Static name of a status code.
 */
const char *starmec_status_name(enum StarmecStatus status);

/**
 * Default constants for `ues` UEs and `elements` surface elements.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `StarmecSystem`.
 */
enum StarmecStatus starmec_system_defaults(size_t ues, size_t elements, struct StarmecSystem *out);

/**
 * Draw UE positions and channels for `seed` with the default geometry and
 * path-loss model.
 *
 * # Safety
 * `system` must point to a valid `StarmecSystem`; `out` must be writable.
 * Release the handle with [`starmec_instance_free`].
 */
enum StarmecStatus starmec_instance_new(const struct StarmecSystem *system,
                                        uint64_t seed,
                                        struct StarmecInstance **out);

/**
 * # Safety
 * `inst` must be null or a handle from [`starmec_instance_new`] not yet freed.
 */
void starmec_instance_free(struct StarmecInstance *inst);

/**
 * Optimize `protocol` with a charging-time grid of spacing `tau0_step`
 * seconds.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` writable. Release the
 * result with [`starmec_solution_free`].
 */
enum StarmecStatus starmec_solve(const struct StarmecInstance *inst,
                                 enum StarmecProtocol protocol,
                                 double tau0_step,
                                 struct StarmecSolution **out);

/**
 * Exhaustive grid optimum on instances with at most two UEs and two
 * elements, at default grid resolution.
 *
 * # Safety
 * `inst` must be a live instance handle and `value` writable.
 */
enum StarmecStatus starmec_brute_force(const struct StarmecInstance *inst,
                                       enum StarmecProtocol protocol,
                                       double tau0_step,
                                       double *value);

/**
 * # Safety
 * `sol` must be a live solution handle and `out` writable.
 */
enum StarmecStatus starmec_solution_summary(const struct StarmecSolution *sol,
                                            struct StarmecSummary *out);

/**
 * Copy the per-UE transmit powers (W) and CPU frequencies (cycles/s) into
 * caller buffers of length `len`, which must equal the UE count. Either
 * buffer may be null.
 *
 * # Safety
 * Non-null buffers must hold `len` writable doubles.
 */
enum StarmecStatus starmec_solution_allocation(const struct StarmecSolution *sol,
                                               double *power,
                                               double *cpu,
                                               size_t len);

/**
 * Objective after every alternation round at the chosen charging time.
 * Writes at most `cap` entries and the full length to `len`; call with a
 * null buffer to query the length.
 *
 * # Safety
 * `buf` must be null or hold `cap` writable doubles; `len` must be writable.
 */
enum StarmecStatus starmec_solution_trace(const struct StarmecSolution *sol,
                                          double *buf,
                                          size_t cap,
                                          size_t *len);

/**
 * # Safety
 * `sol` must be null or a handle from [`starmec_solve`] not yet freed.
 */
void starmec_solution_free(struct StarmecSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STARMEC_H */
