#ifndef INTELM_H
#define INTELM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes.
 */
typedef enum IntelmStatus {
  INTELM_STATUS_OK = 0,
  INTELM_STATUS_NULL_POINTER = 1,
  INTELM_STATUS_INVALID_ARGUMENT = 2,
  INTELM_STATUS_IO = 3,
  INTELM_STATUS_FORMAT = 4,
  INTELM_STATUS_DIMENSION_MISMATCH = 5,
  INTELM_STATUS_OUT_OF_RANGE = 6,
  INTELM_STATUS_HEADROOM = 7,
  INTELM_STATUS_ZERO_INPUT = 8,
  INTELM_STATUS_WRONG_MODEL_KIND = 9,
  INTELM_STATUS_NUMERIC = 10,
  INTELM_STATUS_PANIC = 99,
} IntelmStatus;

/**
 * A loaded model, float or integer.
 */
typedef struct IntelmModel IntelmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next intelm call on this thread.
 */
const char *intelm_last_error_message(void);

/**
 * Reads a model file. On success `*out` owns a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum IntelmStatus intelm_model_load(const char *path, struct IntelmModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle, freed at most once.
 */
void intelm_model_free(struct IntelmModel *model);

/**
 * Writes the model to `path`. An existing file is replaced only when
 * `overwrite` is true.
 *
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum IntelmStatus intelm_model_save(const struct IntelmModel *model,
                                    const char *path,
                                    bool overwrite);

/**
 * Input length, hidden units and class count.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be writable.
 */
enum IntelmStatus intelm_model_dims(const struct IntelmModel *model,
                                    uintptr_t *inputs,
                                    uintptr_t *hidden,
                                    uintptr_t *classes);

/**
 * Writes true when the model classifies on the integer-only path.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IntelmStatus intelm_model_is_quantized(const struct IntelmModel *model, bool *out);

/**
 * Bits per integer output weight (sign included). Integer models only.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IntelmStatus intelm_model_bit_width(const struct IntelmModel *model, uint32_t *out);

/**
 * Classifies one raw integer sample of `len` values. Integer models use
 * integer arithmetic only; float models preprocess the sample first.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `len` values, `class_out`
 * must be writable.
 */
enum IntelmStatus intelm_classify_i32(const struct IntelmModel *model,
                                      const int32_t *x,
                                      uintptr_t len,
                                      uintptr_t *class_out);

/**
 * Classifies one already preprocessed real-valued sample. Float models only.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `len` values, `class_out`
 * must be writable.
 */
enum IntelmStatus intelm_classify_f64(const struct IntelmModel *model,
                                      const double *x,
                                      uintptr_t len,
                                      uintptr_t *class_out);

/**
 * Integer class scores of a raw sample into `scores[0..classes]`.
 * Integer models only.
 *
 * # Safety
 * `model` must be a live handle, `x` must hold `len` values and `scores`
 * must have room for `scores_len` values.
 */
enum IntelmStatus intelm_scores_i64(const struct IntelmModel *model,
                                    const int32_t *x,
                                    uintptr_t len,
                                    int64_t *scores,
                                    uintptr_t scores_len);

/**
 * Integer model from a ternary-weight float model for inputs in
 * `[lo, hi]`. `steps` extra halvings are applied; with `fit` further
 * halvings are taken until the accumulator bounds hold.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum IntelmStatus intelm_model_quantize(const struct IntelmModel *model,
                                        int32_t lo,
                                        int32_t hi,
                                        uint32_t steps,
                                        bool fit,
                                        struct IntelmModel **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTELM_H */
