/* C interface for covmapper: structured-null testing of Mapper community structure. */

#ifndef COVMAPPER_H
#define COVMAPPER_H

/* Generated from the Rust source; edit crates/ffi/src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible function.
typedef enum {
  CM_OK = 0,
  // A required pointer argument was null.
  CM_NULL_POINTER = 1,
  // A parameter or configuration value was malformed.
  CM_INVALID_ARGUMENT = 2,
  // The data matrix was unusable: too small, non-finite, or ragged.
  CM_INVALID_DATA = 3,
  // A numeric stage degenerated: covariance, filters, or null spread.
  CM_NUMERIC_ERROR = 4,
  // Reading an input file failed.
  CM_IO_ERROR = 5,
  // A string argument was not valid UTF-8.
  CM_UTF8_ERROR = 6,
  // An internal invariant failed; existing handles remain valid.
  CM_PANIC = 7,
} cm_status;

// Opaque handle over an n x p feature matrix.
typedef struct cm_dataset cm_dataset;

// Opaque handle over one full test outcome.
typedef struct cm_result cm_result;

// Flat numeric summary of a test result. Quantities the run skipped or
// could not standardize are NaN: `z` when the null samples had no
// spread, the `_excl` entries when singleton-excluded reporting was off,
// and the permutation entries when that baseline did not run.
typedef struct {
  size_t n_points;
  size_t n_features;
  size_t n_vertices;
  size_t n_edges;
  size_t n_communities;
  size_t n_replicates;
  double d_obs;
  double z;
  double p_hat;
  double d_obs_excl;
  double z_excl;
  double p_hat_excl;
  double z_permutation;
  double z_permutation_excl;
} cm_summary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the library version as a static NUL-terminated string.
const char *cm_version(void);

// Returns the message from the most recent failure on this thread, or an
// empty string. The pointer stays valid until the next failing call on
// the same thread.
const char *cm_last_error_message(void);

// Builds a dataset from a row-major buffer of `n * p` finite values.
// Feature and row labels are generated positionally.
//
// # Safety
// `values` must point to at least `n * p` readable doubles and `out` to a
// writable pointer slot.
cm_status cm_dataset_new(const double *values, size_t n, size_t p, cm_dataset **out);

// Loads a dataset from a CSV file. The first row must name the columns,
// the first column holds row ids, and every other column is a numeric
// feature with no missing cells.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer
// slot.
cm_status cm_dataset_from_csv(const char *path, cm_dataset **out);

// Writes the dataset shape: rows to `n`, features to `p`.
//
// # Safety
// `dataset` must be a live handle from this library; `n` and `p` must be
// writable.
cm_status cm_dataset_shape(const cm_dataset *dataset, size_t *n, size_t *p);

// Frees a dataset handle. Null is ignored.
//
// # Safety
// `dataset` must be null or a handle from this library not freed before.
void cm_dataset_free(cm_dataset *dataset);

// Writes a ready-to-edit JSON configuration to `out`: two principal
// coordinate filters on a 15 x 15 equalized cover at gain 2.0, odd/even
// feature split, ridge covariance repair, the given replicate count and
// seed, and no permutation baseline. Free the string with
// `cm_string_free`.
//
// # Safety
// `out` must be a writable pointer slot.
cm_status cm_default_config_json(size_t n_replicates, uint64_t base_seed, char **out);

// Runs the structured-null community test. `config_json` uses the same
// schema `cm_default_config_json` emits; external filters must inline
// their values since no file context exists here.
//
// # Safety
// `dataset` must be a live handle, `config_json` a NUL-terminated string,
// and `out` a writable pointer slot.
cm_status cm_run_test(const cm_dataset *dataset, const char *config_json, cm_result **out);

// Fills `out` with the flat numeric summary of a result.
//
// # Safety
// `result` must be a live handle and `out` a writable summary struct.
cm_status cm_result_summary(const cm_result *result, cm_summary *out);

// Serializes the full result to pretty-printed JSON, identical to the
// command line `report.json`. Free the string with `cm_string_free`.
//
// # Safety
// `result` must be a live handle and `out` a writable pointer slot.
cm_status cm_result_to_json(const cm_result *result, char **out);

// Frees a result handle. Null is ignored.
//
// # Safety
// `result` must be null or a handle from this library not freed before.
void cm_result_free(cm_result *result);

// Frees a string this library allocated. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library not freed before.
void cm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVMAPPER_H */
