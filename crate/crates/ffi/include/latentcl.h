#ifndef LATENTCL_H
#define LATENTCL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LcMetricKind {
  LC_METRIC_KIND_NMC = 0,
  LC_METRIC_KIND_SLDA = 1,
} LcMetricKind;

typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_ARGUMENT = 2,
  LC_STATUS_IO = 3,
  LC_STATUS_FORMAT = 4,
  LC_STATUS_SHAPE = 5,
  LC_STATUS_NUMERIC = 6,
  LC_STATUS_CONFIG = 7,
  LC_STATUS_MODEL = 8,
  LC_STATUS_PANIC = 99,
} LcStatus;

/**
 * Loaded or generated dataset.
 */
typedef struct LcDataset LcDataset;

/**
 * Nearest-mean classifier.
 */
typedef struct LcNmc LcNmc;

/**
 * Streaming LDA state.
 */
typedef struct LcSlda LcSlda;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lc_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lc_version(void);

/**
 * Reads an LCF file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LcStatus lc_dataset_read(const char *path, struct LcDataset **out);

/**
 * Writes `ds` as an LCF file.
 *
 * # Safety
 * `ds` must come from this library; `path` must be NUL-terminated.
 */
enum LcStatus lc_dataset_write(const struct LcDataset *ds, const char *path);

/**
 * Generates a synthetic dataset from a JSON synth config.
 *
 * # Safety
 * `config_json` must be NUL-terminated and `out` a valid pointer.
 */
enum LcStatus lc_dataset_synth(const char *config_json, struct LcDataset **out);

/**
 * Builds a dataset from row-major `n x d` features and `n` labels. Class
 * names are `"0"`, `"1"`, ...
 *
 * # Safety
 * `features` must hold `n * d` floats and `labels` `n` values;
 * `encoder_name` must be NUL-terminated.
 */
enum LcStatus lc_dataset_from_arrays(const float *features,
                                     const uint32_t *labels,
                                     size_t n,
                                     size_t d,
                                     uint32_t n_classes,
                                     const char *encoder_name,
                                     uint64_t encode_flops_per_sample,
                                     struct LcDataset **out);

/**
 * Feature-wise concatenation of `n_parts` datasets with identical labels.
 *
 * # Safety
 * `parts` must point to `n_parts` valid dataset handles.
 */
enum LcStatus lc_dataset_concat(const struct LcDataset *const *parts,
                                size_t n_parts,
                                struct LcDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from this library not yet freed.
 */
void lc_dataset_free(struct LcDataset *ds);

/**
 * Row count, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a valid handle.
 */
size_t lc_dataset_rows(const struct LcDataset *ds);

/**
 * # Safety
 * `ds` must be null or a valid handle.
 */
size_t lc_dataset_dim(const struct LcDataset *ds);

/**
 * # Safety
 * `ds` must be null or a valid handle.
 */
size_t lc_dataset_n_classes(const struct LcDataset *ds);

/**
 * Copies the `rows x dim` features into `out` (capacity `len` floats).
 *
 * # Safety
 * `out` must be writable for `len` floats.
 */
enum LcStatus lc_dataset_copy_features(const struct LcDataset *ds, float *out, size_t len);

/**
 * Copies the labels into `out` (capacity `len`).
 *
 * # Safety
 * `out` must be writable for `len` values.
 */
enum LcStatus lc_dataset_copy_labels(const struct LcDataset *ds, uint32_t *out, size_t len);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum LcStatus lc_nmc_new(size_t dim, struct LcNmc **out);

/**
 * Adds `n` rows of `x` (row-major, model dimension wide) with labels `y`.
 *
 * # Safety
 * `model` must be valid; `x` must hold `n * dim` floats and `y` `n` labels.
 */
enum LcStatus lc_nmc_update(struct LcNmc *model, const float *x, const uint32_t *y, size_t n);

/**
 * Writes one predicted class id per row into `out`.
 *
 * # Safety
 * `x` must hold `n * dim` floats and `out` room for `n` ids.
 */
enum LcStatus lc_nmc_predict(const struct LcNmc *model, const float *x, size_t n, uint32_t *out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void lc_nmc_free(struct LcNmc *model);

/**
 * `shrinkage` in (0, 1]; 1e-4 is the usual choice.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LcStatus lc_slda_new(size_t dim, double shrinkage, struct LcSlda **out);

/**
 * Streams `n` rows into the state, in order.
 *
 * # Safety
 * As for [`lc_nmc_update`].
 */
enum LcStatus lc_slda_update(struct LcSlda *state, const float *x, const uint32_t *y, size_t n);

/**
 * Needs at least two classes.
 *
 * # Safety
 * As for [`lc_nmc_predict`].
 */
enum LcStatus lc_slda_predict(const struct LcSlda *state, const float *x, size_t n, uint32_t *out);

/**
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void lc_slda_free(struct LcSlda *state);

/**
 * Subspace overlap of two row-major feature blocks sharing `cols` columns.
 *
 * # Safety
 * `a` must hold `rows_a * cols` floats, `b` `rows_b * cols`.
 */
enum LcStatus lc_subspace_overlap(const float *a,
                                  size_t rows_a,
                                  const float *b,
                                  size_t rows_b,
                                  size_t cols,
                                  size_t k,
                                  double *out);

/**
 * Mean pairwise cosine between class prototypes of `ds`.
 *
 * # Safety
 * `ds` must be valid and `out` writable.
 */
enum LcStatus lc_prototype_similarity(const struct LcDataset *ds, double *out);

/**
 * Head forward and train-step flops for one sample.
 *
 * # Safety
 * `forward` and `train_step` must be writable.
 */
enum LcStatus lc_mlp_flops_per_sample(size_t d,
                                      size_t h,
                                      size_t c,
                                      double *forward,
                                      double *train_step);

/**
 * Stream-end cumulative flops of latent and end-to-end replay over equal
 * tasks.
 *
 * # Safety
 * `latent` and `end2end` must be writable.
 */
enum LcStatus lc_er_cost(double c_enc,
                         size_t n_z,
                         size_t hidden,
                         size_t n_tasks,
                         size_t classes_per_task,
                         size_t samples_per_class,
                         size_t epochs,
                         size_t er_size,
                         double *latent,
                         double *end2end);

/**
 * Encoding plus fitting cost of a metric classifier. `corrected` selects
 * the per-sample outer-product reading of the SLDA covariance term.
 *
 * # Safety
 * `out` must be writable.
 */
enum LcStatus lc_metric_classifier_cost(enum LcMetricKind kind,
                                        size_t n_samples,
                                        size_t n_classes,
                                        double c_enc,
                                        size_t n_z,
                                        bool corrected,
                                        double *out);

/**
 * Runs an experiment config file and writes its reports. `n_cells` and
 * `n_failed` receive the cell counts when non-null.
 *
 * # Safety
 * `config_path` must be NUL-terminated.
 */
enum LcStatus lc_run_experiment(const char *config_path, size_t *n_cells, size_t *n_failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LATENTCL_H */
