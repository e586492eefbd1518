/* C interface to the 1-bit massive MU-MIMO precoding library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PrecodeStatus {
  PRECODE_STATUS_OK = 0,
  PRECODE_STATUS_NULL_ARGUMENT = 1,
  PRECODE_STATUS_INVALID_ARGUMENT = 2,
  PRECODE_STATUS_DIMENSION_MISMATCH = 3,
  PRECODE_STATUS_NUMERICAL_FAILURE = 4,
} PrecodeStatus;

/**
 * Selectable precoders, mirroring the library's set: linear baselines,
 * the two solvers in floating point, their bit-exact fixed-point models,
 * and the cycle-accurate array simulations.
 */
typedef enum PrecodeAlgorithm {
  PRECODE_ALGORITHM_MRT = 0,
  PRECODE_ALGORITHM_ZF = 1,
  PRECODE_ALGORITHM_MRT_QUANTIZED = 2,
  PRECODE_ALGORITHM_ZF_QUANTIZED = 3,
  PRECODE_ALGORITHM_C1PO = 4,
  PRECODE_ALGORITHM_C2PO = 5,
  PRECODE_ALGORITHM_C1PO_FIXED = 6,
  PRECODE_ALGORITHM_C2PO_FIXED = 7,
  PRECODE_ALGORITHM_C1PO_HARDWARE_SIM = 8,
  PRECODE_ALGORITHM_C2PO_HARDWARE_SIM = 9,
} PrecodeAlgorithm;

/**
 * Opaque downlink problem instance: channel, symbol vector, noise variance,
 * transmit power.
 */
typedef struct PrecodeProblemHandle PrecodeProblemHandle;

/**
 * Creates a problem handle.
 *
 * `h_re_im`: `2*users*antennas` doubles, the row-major `U x B` channel.
 * `s_re_im`: `2*users` doubles, the symbol vector.
 * `noise_variance`: per-complex-entry noise variance `N0 >= 0`.
 * `power`: instantaneous transmit power `P > 0`; the fixed-point and
 * hardware-simulation algorithms require `P = 2*antennas`.
 *
 * Returns null on invalid input. Free with [`precode_problem_free`].
 *
 * # Safety
 * `h_re_im` and `s_re_im` must point to readable buffers of the stated
 * lengths.
 */
struct PrecodeProblemHandle *precode_problem_new(size_t users,
                                                 size_t antennas,
                                                 const double *h_re_im,
                                                 const double *s_re_im,
                                                 double noise_variance,
                                                 double power);

/**
 * Frees a handle created by [`precode_problem_new`]. Null is a no-op.
 *
 * # Safety
 * `handle` must be null or a pointer previously returned by
 * [`precode_problem_new`] that has not been freed.
 */
void precode_problem_free(struct PrecodeProblemHandle *handle);

/**
 * Runs one precoder on the problem.
 *
 * `t_max` is the iteration count for the iterative algorithms (ignored by
 * the linear ones). `x_re_im_out` receives `2*antennas` doubles (the
 * transmit vector); `beta_re_im_out`, when non-null, receives 2 doubles
 * (the MSE-optimal precoding factor).
 *
 * Solver parameters are chosen per instance: hardware-matched constants for
 * the fixed-point/hardware paths, simulation-tuned values for the
 * floating-point solvers.
 *
 * # Safety
 * `handle` must be a live handle from [`precode_problem_new`];
 * `x_re_im_out` must be writable for `2*antennas` doubles and
 * `beta_re_im_out`, if non-null, for 2 doubles.
 */
enum PrecodeStatus precode_run(const struct PrecodeProblemHandle *handle,
                               enum PrecodeAlgorithm algorithm,
                               uint32_t t_max,
                               double *x_re_im_out,
                               double *beta_re_im_out);

/**
 * Per-iteration latency of the systolic arrays in clock cycles
 * (`B + 3` for C1PO, `2U + log2(B/U) + 6` for C2PO), or -1 when the
 * algorithm has no hardware architecture or the geometry is unsupported.
 */
int64_t precode_iteration_latency(enum PrecodeAlgorithm algorithm, size_t antennas, size_t users);

/**
 * Library version as a static NUL-terminated string; do not free.
 */
const char *precode_version(void);
