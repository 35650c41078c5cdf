#ifndef MIXKIT_H
#define MIXKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Assignment search selector for [`mixkit_mixit`].
 */
typedef enum MixkitSearch {
  MIXKIT_SEARCH_AUTO = 0,
  MIXKIT_SEARCH_EXHAUSTIVE = 1,
  MIXKIT_SEARCH_EFFICIENT = 2,
} MixkitSearch;

/**
 * Result code of every fallible call.
 */
typedef enum MixkitStatus {
  MIXKIT_STATUS_OK = 0,
  MIXKIT_STATUS_NULL_POINTER = 1,
  MIXKIT_STATUS_INVALID_ARGUMENT = 2,
  MIXKIT_STATUS_LENGTH_MISMATCH = 3,
  MIXKIT_STATUS_NON_FINITE = 4,
  MIXKIT_STATUS_UNDEFINED_REFERENCE = 5,
  MIXKIT_STATUS_DEGENERATE_MIXTURE = 6,
  MIXKIT_STATUS_TOO_FEW_SOURCES = 7,
  MIXKIT_STATUS_EXHAUSTIVE_INFEASIBLE = 8,
  MIXKIT_STATUS_DIVERGENCE = 9,
  MIXKIT_STATUS_UNSUPPORTED = 10,
  MIXKIT_STATUS_IO = 11,
  MIXKIT_STATUS_FORMAT = 12,
  MIXKIT_STATUS_PANIC = 13,
} MixkitStatus;

/**
 * A batch of reference mixtures and their sum.
 */
typedef struct MixkitBatch MixkitBatch;

/**
 * A set of estimated sources.
 */
typedef struct MixkitSources MixkitSources;

/**
 * Composite loss weights and optimizer settings for [`mixkit_optimize`].
 */
typedef struct MixkitLossConfig {
  double snr_max_db;
  double weight_l1;
  double weight_l1l2;
  double weight_cov;
  size_t num_sources;
  uint64_t exhaustive_cap;
  size_t steps;
  double step_size;
} MixkitLossConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL; 0 when there is none.
 */
size_t mixkit_last_error_length(void);

/**
 * Copies the last error message, NUL-terminated and truncated to fit, into
 * `buf`. Returns the number of bytes written excluding the NUL.
 *
 * # Safety
 * `buf` must be valid for `buf_len` bytes or null.
 */
size_t mixkit_last_error_message(char *buf, size_t buf_len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mixkit_version(void);

/**
 * Default loss and optimizer settings.
 */
struct MixkitLossConfig mixkit_loss_config_default(void);

/**
 * Builds a batch from `n` reference mixtures of `len` samples each.
 *
 * # Safety
 * `refs` must point to `n * len` doubles; `out` must be writable.
 */
enum MixkitStatus mixkit_batch_new(const double *refs,
                                   size_t n,
                                   size_t len,
                                   uint32_t sample_rate,
                                   struct MixkitBatch **out);

/**
 * # Safety
 * `batch` must come from [`mixkit_batch_new`] and not be used afterwards.
 */
void mixkit_batch_free(struct MixkitBatch *batch);

/**
 * Copies the mixture of mixtures into `out`, which must hold `len` doubles.
 *
 * # Safety
 * `batch` must be a live handle and `out` valid for `len` doubles.
 */
enum MixkitStatus mixkit_batch_mom(const struct MixkitBatch *batch, double *out, size_t len);

/**
 * Builds a source set from `m` rows of `len` samples.
 *
 * # Safety
 * `data` must point to `m * len` doubles; `out` must be writable.
 */
enum MixkitStatus mixkit_sources_new(const double *data,
                                     size_t m,
                                     size_t len,
                                     uint32_t sample_rate,
                                     struct MixkitSources **out);

/**
 * # Safety
 * `sources` must come from this library and not be used afterwards.
 */
void mixkit_sources_free(struct MixkitSources *sources);

/**
 * Writes the number of sources and samples per source.
 *
 * # Safety
 * `sources` must be a live handle; `m` and `len` must be writable.
 */
enum MixkitStatus mixkit_sources_shape(const struct MixkitSources *sources, size_t *m, size_t *len);

/**
 * Copies the sources row-major into `out` (`m * len` doubles).
 *
 * # Safety
 * `sources` must be a live handle and `out` valid for `size` doubles.
 */
enum MixkitStatus mixkit_sources_copy(const struct MixkitSources *sources,
                                      double *out,
                                      size_t size);

/**
 * Thresholded SNR loss `−10·log10(‖y‖² / (‖y−ŷ‖² + τ‖y‖²))`.
 *
 * # Safety
 * `y` and `yhat` must point to `len` doubles; `out` must be writable.
 */
enum MixkitStatus mixkit_thresholded_snr_loss(const double *y,
                                              const double *yhat,
                                              size_t len,
                                              double snr_max_db,
                                              double *out);

/**
 * Scale-invariant SNR in dB; may be `±inf`.
 *
 * # Safety
 * `reference` and `estimate` must point to `len` doubles; `out` must be writable.
 */
enum MixkitStatus mixkit_si_snr(const double *reference,
                                const double *estimate,
                                size_t len,
                                double *out);

/**
 * Best binary assignment of sources to references. `owners` receives, for
 * each source, the index of the reference it is assigned to.
 *
 * # Safety
 * Handles must be live; `owners` must hold `owners_len` entries equal to
 * the number of sources; `total_loss` must be writable.
 */
enum MixkitStatus mixkit_mixit(const struct MixkitBatch *batch,
                               const struct MixkitSources *sources,
                               double snr_max_db,
                               enum MixkitSearch search,
                               uint64_t cap,
                               size_t *owners,
                               size_t owners_len,
                               double *total_loss);

/**
 * Normalized `ℓ1/ℓ2` activity sparsity.
 *
 * # Safety
 * `sources` must be a live handle; `out` must be writable.
 */
enum MixkitStatus mixkit_sparsity_l1_l2(const struct MixkitSources *sources, double *out);

/**
 * Sum of absolute off-diagonal source covariances.
 *
 * # Safety
 * `sources` must be a live handle; `out` must be writable.
 */
enum MixkitStatus mixkit_covariance_loss(const struct MixkitSources *sources, double *out);

/**
 * Minimum-cost assignment of every row of a row-major `rows × cols` cost
 * matrix (`rows ≤ cols`) to a distinct column.
 *
 * # Safety
 * `cost` must point to `rows * cols` doubles and `out` to `rows` entries.
 */
enum MixkitStatus mixkit_hungarian(const double *cost, size_t rows, size_t cols, size_t *out);

/**
 * Optimizes `config.num_sources` estimates for `batch` and returns them as a
 * new handle, together with the final composite loss.
 *
 * # Safety
 * `batch` and `config` must be valid; `out` and `final_loss` writable.
 */
enum MixkitStatus mixkit_optimize(const struct MixkitBatch *batch,
                                  const struct MixkitLossConfig *config,
                                  uint64_t seed,
                                  struct MixkitSources **out,
                                  double *final_loss);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIXKIT_H */
