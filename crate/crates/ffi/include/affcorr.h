#ifndef AFFCORR_H
#define AFFCORR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum AffcorrStatus {
  AFFCORR_STATUS_OK = 0,
  AFFCORR_STATUS_NULL_POINTER = 1,
  AFFCORR_STATUS_INVALID_INPUT = 2,
  AFFCORR_STATUS_SHAPE = 3,
  AFFCORR_STATUS_FORMAT = 4,
  AFFCORR_STATUS_IO = 5,
  AFFCORR_STATUS_DATA = 6,
  AFFCORR_STATUS_NO_LABEL = 7,
  AFFCORR_STATUS_BUFFER_TOO_SMALL = 8,
  AFFCORR_STATUS_INTERNAL = 9,
} AffcorrStatus;

typedef enum AffcorrModality {
  AFFCORR_MODALITY_IMAGE = 0,
  AFFCORR_MODALITY_MUSIC = 1,
} AffcorrModality;

/**
 * Broad emotion classes. `None` marks a tag that maps to no class.
 */
typedef enum AffcorrEmotion {
  AFFCORR_EMOTION_NONE = -1,
  AFFCORR_EMOTION_POSITIVE = 0,
  AFFCORR_EMOTION_NEUTRAL = 1,
  AFFCORR_EMOTION_NEGATIVE = 2,
} AffcorrEmotion;

/**
 * A loaded correspondence model.
 */
typedef struct AffcorrModel AffcorrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or null. The
 * pointer stays valid until the next call on the same thread.
 */
const char *affcorr_last_error(void);

/**
 * Length of a music feature vector.
 */
size_t affcorr_feature_dim(void);

/**
 * Loads a checkpoint file into a new handle written to `out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AffcorrStatus affcorr_model_load(const char *path, struct AffcorrModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `affcorr_model_load` and not be used afterwards.
 */
void affcorr_model_free(struct AffcorrModel *model);

/**
 * Input and embedding widths of a model.
 *
 * # Safety
 * `model` must be a live handle; output pointers may be null.
 */
enum AffcorrStatus affcorr_model_dims(const struct AffcorrModel *model,
                                      size_t *image_dim,
                                      size_t *music_dim,
                                      size_t *embed_dim);

/**
 * Probability that an image embedding and a music feature vector share
 * an emotion class.
 *
 * # Safety
 * `model` must be a live handle, the inputs must hold the given lengths
 * and `p_true` must be valid.
 */
enum AffcorrStatus affcorr_predict(const struct AffcorrModel *model,
                                   const float *image,
                                   size_t image_len,
                                   const float *music,
                                   size_t music_len,
                                   float *p_true);

/**
 * Embedding of one input in the shared space, written to `out`
 * (`out_len` must be at least the embedding width).
 *
 * # Safety
 * `model` must be a live handle; `input` and `out` must hold the given lengths.
 */
enum AffcorrStatus affcorr_embed(const struct AffcorrModel *model,
                                 enum AffcorrModality modality,
                                 const float *input,
                                 size_t input_len,
                                 float *out,
                                 size_t out_len);

/**
 * Music features of one 60 s mono segment, written to `out` (at least
 * 193 values). Audio at other rates is resampled to 22050 Hz first.
 *
 * # Safety
 * `samples` must hold `n_samples` values and `out` `out_len` values.
 */
enum AffcorrStatus affcorr_segment_features(const float *samples,
                                            size_t n_samples,
                                            uint32_t sample_rate,
                                            float *out,
                                            size_t out_len);

/**
 * Broad class of a fine-grained image emotion label such as "awe".
 *
 * # Safety
 * `label` must be NUL-terminated and `out` valid.
 */
enum AffcorrStatus affcorr_regroup_image_label(const char *label, enum AffcorrEmotion *out);

/**
 * Emotion class of a user tag, or `None` when it is unrelated or ambiguous.
 *
 * # Safety
 * `tag` must be NUL-terminated and `out` valid.
 */
enum AffcorrStatus affcorr_classify_tag(const char *tag, enum AffcorrEmotion *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFFCORR_H */
