#ifndef MPE_H
#define MPE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bits of [`MpeDiagnostics::bound_flags`].
 */
#define MPE_FLAG_QV 1

#define MPE_FLAG_QC 2

#define MPE_FLAG_QR 4

#define MPE_FLAG_T 8

/**
 * Result code of every fallible call.
 */
typedef enum MpeStatus {
  MPE_STATUS_OK = 0,
  MPE_STATUS_NULL_POINTER = 1,
  MPE_STATUS_INVALID_UTF8 = 2,
  MPE_STATUS_CONFIG = 3,
  MPE_STATUS_INVARIANT = 4,
  /**
   * Non-convergence, non-finite values or a failed compatibility check
   * while stepping. The model keeps its last good state.
   */
  MPE_STATUS_RUNTIME = 5,
  MPE_STATUS_IO = 6,
  MPE_STATUS_BUFFER_TOO_SMALL = 7,
  MPE_STATUS_INVALID_ARGUMENT = 8,
  MPE_STATUS_PANIC = 9,
} MpeStatus;

/**
 * Fields readable with [`mpe_model_copy_field`].
 */
typedef enum MpeField {
  MPE_FIELD_V1 = 0,
  MPE_FIELD_V2 = 1,
  MPE_FIELD_T = 2,
  MPE_FIELD_QV = 3,
  MPE_FIELD_QC = 4,
  MPE_FIELD_QR = 5,
  MPE_FIELD_PHI = 6,
  /**
   * On the `np + 1` pressure faces.
   */
  MPE_FIELD_W = 7,
  /**
   * Surface geopotential, one level.
   */
  MPE_FIELD_PHI_S = 8,
} MpeField;

/**
 * Opaque simulation handle.
 */
typedef struct MpeModel MpeModel;

/**
 * Summary of the current state.
 */
typedef struct MpeDiagnostics {
  double time;
  uint64_t step;
  double v_l2;
  double v_h1;
  double t_l2;
  double t_min;
  double t_max;
  double qv_min;
  double qv_max;
  double qc_min;
  double qc_max;
  double qr_min;
  double qr_max;
  double continuity_residual;
  double w_top;
  double div_top;
  double dn_v_lateral;
  double projection_residual;
  uint64_t projection_iterations;
  /**
   * `MPE_FLAG_*` bits set for fields above their a priori bound.
   */
  uint32_t bound_flags;
} MpeDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model from configuration text and its initial state.
 *
 * # Safety
 * `config` must be a NUL-terminated string or null; `out` must be writable.
 */
enum MpeStatus mpe_model_new(const char *config, struct MpeModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must come from [`mpe_model_new`] and not be used afterwards.
 */
void mpe_model_free(struct MpeModel *h);

/**
 * Advances one step. `dt <= 0` selects the configured step (fixed or
 * adaptive). On failure the state is left unchanged.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum MpeStatus mpe_model_step(struct MpeModel *h, double dt);

/**
 * Advances `steps` configured steps; stops at the first failure.
 *
 * # Safety
 * `h` must be a live handle.
 */
enum MpeStatus mpe_model_run(struct MpeModel *h, uint64_t steps);

/**
 * Model time, or NaN for a null handle.
 *
 * # Safety
 * `h` must be a live handle or null.
 */
double mpe_model_time(const struct MpeModel *h);

/**
 * Interior grid sizes.
 *
 * # Safety
 * `h` must be a live handle; the outputs must be writable.
 */
enum MpeStatus mpe_model_dims(const struct MpeModel *h, size_t *nx, size_t *ny, size_t *np);

/**
 * Number of values [`mpe_model_copy_field`] writes for `field`, or 0 for a
 * null handle.
 *
 * # Safety
 * `h` must be a live handle or null.
 */
size_t mpe_field_len(const struct MpeModel *h, enum MpeField field);

/**
 * Copies a field into `buf` (capacity `len` values).
 *
 * # Safety
 * `h` must be a live handle; `buf` must hold `len` doubles.
 */
enum MpeStatus mpe_model_copy_field(const struct MpeModel *h,
                                    enum MpeField field,
                                    double *buf,
                                    size_t len);

/**
 * Fills `out` with the diagnostics of the current state.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum MpeStatus mpe_model_diagnostics(const struct MpeModel *h, struct MpeDiagnostics *out);

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 * message length in bytes (without the terminator).
 *
 * # Safety
 * `buf` must hold `len` bytes, or be null with `len == 0`.
 */
size_t mpe_last_error(char *buf, size_t len);

/**
 * Library version, static NUL-terminated string.
 */
const char *mpe_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MPE_H */
