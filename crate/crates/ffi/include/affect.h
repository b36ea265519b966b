#ifndef AFFECT_H
#define AFFECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of coefficients written by [`affect_mfcc`].
 */
#define AFFECT_MFCC_COEFFS 13

/**
 * Result code of every fallible call.
 */
typedef enum AffectStatus {
  AFFECT_STATUS_OK = 0,
  AFFECT_STATUS_NULL_POINTER = 1,
  AFFECT_STATUS_INVALID_ARGUMENT = 2,
  AFFECT_STATUS_IO = 3,
  AFFECT_STATUS_PARSE = 4,
  AFFECT_STATUS_CONFIG = 5,
  AFFECT_STATUS_CHECKPOINT = 6,
  AFFECT_STATUS_KIND_MISMATCH = 7,
  AFFECT_STATUS_INTERNAL = 8,
  AFFECT_STATUS_PANIC = 9,
} AffectStatus;

typedef enum AffectModelKind {
  AFFECT_MODEL_KIND_EMOTION = 0,
  AFFECT_MODEL_KIND_SENTIMENT = 1,
  AFFECT_MODEL_KIND_HUMOR = 2,
} AffectModelKind;

typedef enum AffectChallenge {
  AFFECT_CHALLENGE_NONE = 0,
  AFFECT_CHALLENGE_DISCLOSURE_RECIPROCITY = 1,
  AFFECT_CHALLENGE_CLARIFICATION = 2,
  AFFECT_CHALLENGE_AVOIDANCE = 3,
  AFFECT_CHALLENGE_DELIBERATE_CHALLENGE = 4,
  AFFECT_CHALLENGE_ABUSIVE = 5,
  AFFECT_CHALLENGE_GARBAGE = 6,
} AffectChallenge;

/**
 * A loaded model. Opaque to C callers.
 */
typedef struct AffectModel AffectModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *affect_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *affect_last_error(void);

/**
 * Loads a checkpoint file into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AffectStatus affect_model_load(const char *path, struct AffectModel **out);

/**
 * Releases a handle. Passing NULL is a no-op.
 *
 * # Safety
 * `model` must come from [`affect_model_load`] and not be used afterwards.
 */
void affect_model_free(struct AffectModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum AffectStatus affect_model_kind(const struct AffectModel *model, enum AffectModelKind *out);

/**
 * Positive-class probability of an emotion model for mono samples.
 *
 * # Safety
 * `samples` must point to `len` doubles; `out` must be valid.
 */
enum AffectStatus affect_emotion_predict(const struct AffectModel *model,
                                         const double *samples,
                                         size_t len,
                                         uint32_t sample_rate,
                                         double *out);

/**
 * Positive-sentiment probability of `text`. Audio is required only by
 * models trained with the audio channel; otherwise pass NULL and 0.
 *
 * # Safety
 * `text` must be NUL-terminated; `samples` must point to `len` doubles
 * when non-null; `out` must be valid.
 */
enum AffectStatus affect_sentiment_predict(const struct AffectModel *model,
                                           const char *text,
                                           const double *samples,
                                           size_t len,
                                           uint32_t sample_rate,
                                           double *out);

/**
 * Punchline probability of the last of `k` utterances. `context[i]` is
 * the text of utterance `i` (oldest first) or NULL for turns before the
 * dialog began; `k` must equal the model's window. The audio belongs to
 * the last utterance and may be NULL for silence.
 *
 * # Safety
 * `context` must point to `k` pointers, each NULL or NUL-terminated;
 * `speaker` must be NUL-terminated; `samples` must point to `len` doubles
 * when non-null; `out` must be valid.
 */
enum AffectStatus affect_humor_predict(const struct AffectModel *model,
                                       const char *const *context,
                                       size_t k,
                                       const double *samples,
                                       size_t len,
                                       uint32_t sample_rate,
                                       const char *speaker,
                                       double duration_s,
                                       double *out);

/**
 * Rule-based challenge category of a user response.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum AffectStatus affect_classify_challenge(const char *text, enum AffectChallenge *out);

/**
 * MFCCs of one frame: writes [`AFFECT_MFCC_COEFFS`] values to `out`,
 * which must hold `out_len >= AFFECT_MFCC_COEFFS` doubles.
 *
 * # Safety
 * `frame` must point to `len` doubles and `out` to `out_len` doubles.
 */
enum AffectStatus affect_mfcc(const double *frame,
                              size_t len,
                              uint32_t sample_rate,
                              double *out,
                              size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFFECT_H */
