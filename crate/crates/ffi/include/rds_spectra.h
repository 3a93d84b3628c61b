#ifndef RDS_SPECTRA_H
#define RDS_SPECTRA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum RdsStatus {
  Ok = 0,
  NullArgument = 1,
  InvalidUtf8 = 2,
  UnknownScenario = 3,
  InvalidParams = 4,
  SingularGenerator = 5,
  NumericError = 6,
  ConfigError = 7,
  InternalError = 8,
} RdsStatus;

/**
 * Opaque cocycle-system handle.
 */
typedef struct RdsSystem RdsSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *rds_version(void);

/**
 * Message for the most recent error on this thread, or NULL. Free with
 * `rds_string_free`.
 */
char *rds_last_error_message(void);

/**
 * # Safety
 * `s` must be a string returned by this library and not yet freed.
 */
void rds_string_free(char *s);

/**
 * Build a named scenario system. `beta`, `diag_a`, `diag_b`, `dim` feed
 * the scenario parameters; pass 0 to keep a default. On success writes an
 * owned handle to `out`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum RdsStatus rds_system_from_scenario(const char *name,
                                        double beta,
                                        double diag_a,
                                        double diag_b,
                                        uint32_t dim,
                                        struct RdsSystem **out);

/**
 * # Safety
 * `handle` must come from `rds_system_from_scenario` and not be freed twice.
 */
void rds_system_free(struct RdsSystem *handle);

/**
 * State-space dimension of the system.
 *
 * # Safety
 * `handle` must be a live system handle; `out` must be valid.
 */
enum RdsStatus rds_system_dim(const struct RdsSystem *handle, uint32_t *out);

/**
 * Finite-time Lyapunov exponent of direction `x` (length `x_len`) at
 * horizon `t_horizon` from the base point drawn with `seed`.
 *
 * # Safety
 * `x` must point to `x_len` doubles; `out` must be valid.
 */
enum RdsStatus rds_ftle(const struct RdsSystem *handle,
                        uint64_t seed,
                        int64_t t_horizon,
                        const double *x,
                        uintptr_t x_len,
                        double *out);

/**
 * Relative finite-time exponent with horizon `t_horizon` and offset
 * `t_offset`.
 *
 * # Safety
 * As `rds_ftle`.
 */
enum RdsStatus rds_ftle_relative(const struct RdsSystem *handle,
                                 uint64_t seed,
                                 int64_t t_horizon,
                                 int64_t t_offset,
                                 const double *x,
                                 uintptr_t x_len,
                                 double *out);

/**
 * QR Lyapunov exponents (descending) into `out`, which must hold `dim`
 * doubles.
 *
 * # Safety
 * `out` must point to at least `out_len` doubles.
 */
enum RdsStatus rds_lyapunov_qr(const struct RdsSystem *handle,
                               uint64_t seed,
                               int64_t t_horizon,
                               double *out,
                               uintptr_t out_len);

/**
 * Execute a full run from a JSON configuration string (same schema as the
 * CLI) and hand back the JSON report. Free the result with
 * `rds_string_free`.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_report` must be valid.
 */
enum RdsStatus rds_run_config_json(const char *config_json, char **out_report);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RDS_SPECTRA_H */
