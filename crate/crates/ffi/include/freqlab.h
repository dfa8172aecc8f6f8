#ifndef FREQLAB_H
#define FREQLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FlqStatus {
  FLQ_STATUS_OK = 0,
  FLQ_STATUS_NULL_POINTER = 1,
  FLQ_STATUS_INVALID_UTF8 = 2,
  FLQ_STATUS_CONFIG = 3,
  FLQ_STATUS_PARSE = 4,
  FLQ_STATUS_DOMAIN = 5,
  FLQ_STATUS_PRECONDITION = 6,
  FLQ_STATUS_DEGENERATE = 7,
  FLQ_STATUS_NUMERICAL = 8,
  FLQ_STATUS_IO = 9,
  FLQ_STATUS_OUT_OF_RANGE = 10,
  FLQ_STATUS_PANIC = 11,
} FlqStatus;

/**
 * Opaque bundle handle.
 */
typedef struct FlqBundle FlqBundle;

/**
 * Opaque solution handle.
 */
typedef struct FlqSolution FlqSolution;

typedef struct FlqBundleRow {
  double r;
  double h;
  double d;
  double l;
  double n;
  double ntilde;
} FlqBundleRow;

typedef struct FlqThreeBall {
  double kappa;
  double lhs;
  double factor1;
  double factor3;
  double log_slack;
  /**
   * NaN when no finite constant exists.
   */
  double fitted_c;
  bool passed;
} FlqThreeBall;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`) and returns the full length plus one.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t flq_last_error(char *buf, size_t len);

/**
 * `exp(√M x₁)` in dimension `dim`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum FlqStatus flq_solution_exponential(size_t dim, double m, struct FlqSolution **out);

/**
 * `sin(√M x₁)` in dimension `dim`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum FlqStatus flq_solution_oscillatory(size_t dim, double m, struct FlqSolution **out);

/**
 * Harmonic polynomial of `degree`; `variant` 0 = Re, 1 = Im, 2 = zonal (3D).
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum FlqStatus flq_solution_harmonic(size_t dim,
                                     uint32_t degree,
                                     uint32_t variant,
                                     struct FlqSolution **out);

/**
 * Value of the solution at `x[0..dim]`.
 *
 * # Safety
 * `sol` must come from a `flq_solution_*` constructor; `x` must point to
 * `dim` doubles and `out` to one.
 */
enum FlqStatus flq_solution_value(const struct FlqSolution *sol,
                                  const double *x,
                                  size_t dim,
                                  double *out);

/**
 * # Safety
 * `sol` must be null or a live handle; it is invalid afterwards.
 */
void flq_solution_free(struct FlqSolution *sol);

/**
 * Classical bundle on `B_radius(0)` at `n_radii` radii.
 *
 * # Safety
 * `sol` must be a live handle, `radii` must point to `n_radii` doubles and
 * `out` to a handle slot.
 */
enum FlqStatus flq_bundle_classical(const struct FlqSolution *sol,
                                    double radius,
                                    uint32_t levels,
                                    double alpha,
                                    const double *radii,
                                    size_t n_radii,
                                    struct FlqBundle **out);

/**
 * Number of rows, 0 for a null handle.
 *
 * # Safety
 * `b` must be null or a live handle.
 */
size_t flq_bundle_len(const struct FlqBundle *b);

/**
 * # Safety
 * `b` must be a live handle and `out` a valid pointer.
 */
enum FlqStatus flq_bundle_row(const struct FlqBundle *b, size_t i, struct FlqBundleRow *out);

/**
 * # Safety
 * `b` must be null or a live handle; it is invalid afterwards.
 */
void flq_bundle_free(struct FlqBundle *b);

/**
 * Classical three-ball check on `B_radius(0)`.
 *
 * # Safety
 * `sol` must be a live handle and `out` a valid pointer.
 */
enum FlqStatus flq_three_ball_classical(const struct FlqSolution *sol,
                                        double radius,
                                        uint32_t levels,
                                        double r1,
                                        double r2,
                                        double r3,
                                        struct FlqThreeBall *out);

/**
 * Runs a scenario file. `out_dir` may be null (environment or scenario
 * default); `levels` 0 keeps the scenario's level. `exit_code` receives the
 * command-line exit status (0 pass, 1 verdict failure, 2 usage, 3 internal).
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out_dir` null or one, and
 * `exit_code` a valid pointer.
 */
enum FlqStatus flq_run_scenario(const char *path,
                                const char *out_dir,
                                uint32_t levels,
                                int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREQLAB_H */
