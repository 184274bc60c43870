#ifndef SOBOLEV_CONFORMAL_H
#define SOBOLEV_CONFORMAL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  SC_STATUS_NULL_POINTER = 1,
  SC_STATUS_INVALID_ARGUMENT = 2,
  SC_STATUS_INSUFFICIENT_DATA = 3,
  SC_STATUS_NUMERICAL_FAILURE = 4,
  SC_STATUS_IO = 5,
  SC_STATUS_FORMAT = 6,
  SC_STATUS_PANIC = 7,
} ScStatus;

// Fourier coefficients on a centered `G x G` mode grid.
typedef struct ScField ScField;

// A trained spectral surrogate.
typedef struct ScModel ScModel;

// Calibration scores and quantiles.
typedef struct ScQuantileTable ScQuantileTable;

// Sobolev order `s`, decay `tau` and truncation `trunc`.
typedef struct ScSobolevSpec {
  double s;
  double tau;
  size_t trunc;
} ScSobolevSpec;

// One-sided paired t-test of `mean > 0`.
typedef struct ScPairedTest {
  size_t n;
  double mean;
  double std_error;
  double t;
  double p_value;
  bool degenerate;
} ScPairedTest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *sc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sc_version(void);

// Allocates a zero field on a `grid_size x grid_size` mode grid. Real fields
// keep Hermitian symmetry when written through [`sc_field_set`].
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum ScStatus sc_field_new(size_t grid_size, bool real, struct ScField **out);

// Releases a field. Null is ignored.
//
// # Safety
// `field` must be null or a handle from this library not yet freed.
void sc_field_free(struct ScField *field);

// # Safety
// `field` must be a live handle and `out` writable.
enum ScStatus sc_field_grid_size(const struct ScField *field, size_t *out);

// Writes coefficient `(n1, n2)`. For real fields the conjugate partner is
// written too.
//
// # Safety
// `field` must be a live handle.
enum ScStatus sc_field_set(struct ScField *field, int32_t n1, int32_t n2, double re, double im);

// # Safety
// `field` must be a live handle; `re` and `im` must be writable.
enum ScStatus sc_field_get(const struct ScField *field,
                           int32_t n1,
                           int32_t n2,
                           double *re,
                           double *im);

// `Σ (1 + |n|²)^s |û_n|²`.
//
// # Safety
// `field` must be a live handle and `out` writable.
enum ScStatus sc_sobolev_norm_sq(const struct ScField *field, double s, double *out);

// Truncated conformity score of `observed` around `center`.
//
// # Safety
// Both fields must be live handles and `out` writable.
enum ScStatus sc_score(const struct ScField *center,
                       const struct ScField *observed,
                       struct ScSobolevSpec spec,
                       double *out);

// Loads a model written by the `train` stage.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum ScStatus sc_model_load(const char *path, struct ScModel **out);

// # Safety
// `model` must be null or a live handle.
void sc_model_free(struct ScModel *model);

// Applies the surrogate; the prediction is a new field owned by the caller.
//
// # Safety
// `model` and `input` must be live handles and `out` writable.
enum ScStatus sc_model_apply(const struct ScModel *model,
                             const struct ScField *input,
                             struct ScField **out);

// Loads a quantile table written by the `calibrate` stage.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum ScStatus sc_quantile_table_load(const char *path, struct ScQuantileTable **out);

// # Safety
// `table` must be null or a live handle.
void sc_quantile_table_free(struct ScQuantileTable *table);

// Raw conformal quantile of the scores truncated at `trunc`.
//
// # Safety
// `table` must be a live handle and `out` writable.
enum ScStatus sc_quantile_table_quantile(const struct ScQuantileTable *table,
                                         size_t trunc,
                                         double alpha,
                                         double *out);

// The `⌈(n+1)(1−α)⌉`-th smallest of `scores`.
//
// # Safety
// `scores` must point to `n` readable doubles and `out` must be writable.
enum ScStatus sc_conformal_quantile(const double *scores, size_t n, double alpha, double *out);

// `q_raw + margin · trunc^{−2τ}`.
double sc_corrected_quantile(double q_raw, double margin, size_t trunc, double tau);

// Mutual information in nats of the discrimination channel under uniform
// priors.
//
// # Safety
// `phi` and `g` must each point to `m` readable doubles; `out` writable.
enum ScStatus sc_mutual_information(const double *phi, const double *g, size_t m, double *out);

// Row-major `m x m` table with `probs[k * m + j] = P(B = j | A = k)`.
//
// # Safety
// `phi` and `g` must each point to `m` readable doubles and `probs` to `m * m`
// writable doubles.
enum ScStatus sc_channel_probs(const double *phi, const double *g, size_t m, double *probs);

// # Safety
// `diffs` must point to `n` readable doubles and `out` must be writable.
enum ScStatus sc_paired_t_test(const double *diffs, size_t n, struct ScPairedTest *out);

// Runs a pipeline step (`generate-data`, `train`, `calibrate`, `curve`,
// `collect-experiment`, `quantum-experiment` or `all`). A null
// `config_path` uses the defaults; a non-null `out_dir` overrides the
// configured output directory.
//
// # Safety
// Non-null arguments must be NUL-terminated strings.
enum ScStatus sc_run_pipeline(const char *config_path, const char *step, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOBOLEV_CONFORMAL_H */
