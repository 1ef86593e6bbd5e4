#ifndef SLICEFED_H
#define SLICEFED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_ARGUMENT = 2,
  SF_STATUS_PARSE = 3,
  SF_STATUS_DIMENSION = 4,
  SF_STATUS_DEGENERATE = 5,
  SF_STATUS_IO = 6,
  SF_STATUS_PANIC = 7,
} SfStatus;

/*
 A loaded detector.
 */
typedef struct SfModel SfModel;

/*
 One-way ANOVA table.
 */
typedef struct SfAnova {
  size_t df_model;
  size_t df_error;
  double ss_model;
  double ss_error;
  double ss_total;
  double ms_model;
  double ms_error;
  double f_value;
  double p_value;
  double r_square;
} SfAnova;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on this thread.
 */
const char *sf_last_error(void);

/*
 Library version, static storage.
 */
const char *sf_version(void);

/*
 Parses a model from a NUL-terminated JSON string.

 # Safety
 `json` must be a valid C string; `out` must be valid for a write.
 */
enum SfStatus sf_model_from_json(const char *json, struct SfModel **out);

/*
 Loads a model file.

 # Safety
 `path` must be a valid C string; `out` must be valid for a write.
 */
enum SfStatus sf_model_load(const char *path, struct SfModel **out);

/*
 # Safety
 `model` must be null or a handle from this library not yet freed.
 */
void sf_model_free(struct SfModel *model);

/*
 Feature count the model expects; 0 for a null handle.

 # Safety
 `model` must be null or a live handle.
 */
size_t sf_model_n_features(const struct SfModel *model);

/*
 Schema digest the model was trained against; empty when unknown.
 Owned by the handle.

 # Safety
 `model` must be null or a live handle.
 */
const char *sf_model_schema_hash(const struct SfModel *model);

/*
 Scores one feature vector. `label` is 1 (malignant) when the score is
 at least 0.5. Either output may be null.

 # Safety
 `model` must be a live handle, `features` valid for `n` reads, and
 non-null outputs valid for a write.
 */
enum SfStatus sf_model_predict(const struct SfModel *model,
                               const double *features,
                               size_t n,
                               double *score,
                               uint8_t *label);

/*
 One-way ANOVA. `values` holds the groups back to back; `group_sizes`
 gives each group's length.

 # Safety
 `group_sizes` valid for `n_groups` reads, `values` for their sum, `out` for a write.
 */
enum SfStatus sf_anova_oneway(const double *values,
                              const size_t *group_sizes,
                              size_t n_groups,
                              struct SfAnova *out);

/*
 Upper-tail probability of the F distribution; NaN for non-positive degrees of freedom.
 */
double sf_f_survival(double f, double df1, double df2);

/*
 Area under the ROC curve; labels are 0 or 1.

 # Safety
 `scores` and `labels` valid for `n` reads, `auc` for a write.
 */
enum SfStatus sf_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *auc);

/*
 `1 - cos(u, v)`.

 # Safety
 `u` and `v` valid for `n` reads, `out` for a write.
 */
enum SfStatus sf_cosine_divergence(const double *u, const double *v, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLICEFED_H */
