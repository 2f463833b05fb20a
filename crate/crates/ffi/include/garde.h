#ifndef GARDE_H
#define GARDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GardeStatus {
  GARDE_STATUS_OK = 0,
  // A required pointer argument was NULL.
  GARDE_STATUS_NULL_POINTER = 1,
  // An argument or configuration value is out of range.
  GARDE_STATUS_INVALID_ARGUMENT = 2,
  // The observations are inconsistent or insufficient.
  GARDE_STATUS_DATA = 3,
  // A numerical failure such as a singular or degenerate configuration.
  GARDE_STATUS_NUMERICAL = 4,
  // The library panicked; the handle arguments should be discarded.
  GARDE_STATUS_INTERNAL = 5,
} GardeStatus;

// Opaque node-by-source distance observations.
typedef struct GardeObservations GardeObservations;

// Opaque calibration output.
typedef struct GardeResult GardeResult;

// Engine parameters. Obtain defaults from [`garde_config_default`].
typedef struct GardeCalibrationConfig {
  double alpha;
  double beta;
  uint32_t num_iterations;
  uint32_t num_annealing;
  double mu0;
  double mu_decay;
  double fit_fraction;
  uint32_t min_fit_sources;
  uint64_t rng_seed;
} GardeCalibrationConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a
// successful call. The string stays valid until the next call into the
// library from the same thread.
const char *garde_last_error_message(void);

// Static description of a status code.
const char *garde_status_string(enum GardeStatus status);

struct GardeCalibrationConfig garde_config_default(void);

// Builds an observation set from `node_count * source_count` row-major
// distances. `valid` may be NULL (every entry observed); otherwise a
// nonzero byte marks an observed entry.
//
// # Safety
// `distances` must point to `node_count * source_count` readable doubles,
// `valid` to as many bytes when not NULL, and `out` must be writable.
enum GardeStatus garde_observations_new(uintptr_t node_count,
                                        uintptr_t source_count,
                                        const double *distances,
                                        const uint8_t *valid,
                                        struct GardeObservations **out);

// # Safety
// `obs` must be NULL or a handle from [`garde_observations_new`] not yet freed.
void garde_observations_free(struct GardeObservations *obs);

// Calibrates nodes and sources. `config` may be NULL for the defaults.
//
// # Safety
// `obs` must be a live handle, `config` NULL or readable, `out` writable.
enum GardeStatus garde_calibrate(const struct GardeObservations *obs,
                                 const struct GardeCalibrationConfig *config,
                                 struct GardeResult **out);

// # Safety
// `result` must be NULL or a handle from [`garde_calibrate`] not yet freed.
void garde_result_free(struct GardeResult *result);

// # Safety
// `result` must be a live handle.
uintptr_t garde_result_node_count(const struct GardeResult *result);

// # Safety
// `result` must be a live handle.
uintptr_t garde_result_source_count(const struct GardeResult *result);

// Mean absolute residual of the returned geometry, NaN for a NULL handle.
//
// # Safety
// `result` must be a live handle.
double garde_result_fit_score(const struct GardeResult *result);

// Copies the node positions into `out_xy`, which holds `capacity` points.
//
// # Safety
// `result` must be a live handle and `out_xy` writable for `2 * capacity` doubles.
enum GardeStatus garde_result_nodes(const struct GardeResult *result,
                                    double *out_xy,
                                    uintptr_t capacity);

// Copies the source positions into `out_xy`, which holds `capacity` points.
//
// # Safety
// `result` must be a live handle and `out_xy` writable for `2 * capacity` doubles.
enum GardeStatus garde_result_sources(const struct GardeResult *result,
                                      double *out_xy,
                                      uintptr_t capacity);

// Copies the indices of the sources kept by the final source selection.
// `out_len` receives their number; with `out` NULL only the count is returned.
//
// # Safety
// `result` must be a live handle, `out_len` writable, and `out` NULL or
// writable for `capacity` elements.
enum GardeStatus garde_result_selected_sources(const struct GardeResult *result,
                                               uintptr_t *out,
                                               uintptr_t capacity,
                                               uintptr_t *out_len);

// RMS distance between `estimate` and `reference` after the best rigid
// alignment; `allow_reflection` also admits mirrored alignments.
//
// # Safety
// Both arrays must hold `count` points; `out` must be writable.
enum GardeStatus garde_calibration_error(const double *estimate_xy,
                                         const double *reference_xy,
                                         uintptr_t count,
                                         bool allow_reflection,
                                         double *out);

// Cramér-Rao RMSE bound for a source at `(x, y)` ranged by the given nodes.
//
// # Safety
// `nodes_xy` must hold `node_count` points; `out` must be writable.
enum GardeStatus garde_source_rmse_bound(const double *nodes_xy,
                                         uintptr_t node_count,
                                         double x,
                                         double y,
                                         double sigma_d,
                                         double *out);

// Cramér-Rao RMSE bound for a node at `(x, y)` ranged by the given sources.
//
// # Safety
// `sources_xy` must hold `source_count` points; `out` must be writable.
enum GardeStatus garde_node_rmse_bound(const double *sources_xy,
                                       uintptr_t source_count,
                                       double x,
                                       double y,
                                       double sigma_d,
                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GARDE_H */
