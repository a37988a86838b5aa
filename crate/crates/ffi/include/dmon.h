#ifndef DMON_H
#define DMON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DmonStatus {
  DMON_STATUS_OK = 0,
  DMON_STATUS_NULL_POINTER = 1,
  DMON_STATUS_INVALID_ARGUMENT = 2,
  DMON_STATUS_IO = 3,
  DMON_STATUS_PARSE = 4,
  DMON_STATUS_NUMERIC = 5,
  DMON_STATUS_UNSUPPORTED = 6,
  DMON_STATUS_PANIC = 7,
} DmonStatus;

/**
 * Which tower a fused cell came from.
 */
typedef enum DmonBranch {
  DMON_BRANCH_HEAD = 0,
  DMON_BRANCH_TAIL = 1,
} DmonBranch;

/**
 * A loaded checkpoint. Opaque to C.
 */
typedef struct DmonModel DmonModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads the checkpoint directory at `path` into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DmonStatus dmon_model_load(const char *path, struct DmonModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`dmon_model_load`] and not be used afterwards.
 */
void dmon_model_free(struct DmonModel *model);

/**
 * Pair-embedding width the model expects; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dmon_model_embed_dim(const struct DmonModel *model);

/**
 * Number of relation classes; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dmon_model_num_labels(const struct DmonModel *model);

/**
 * Index of the no-relation class.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t dmon_model_no_relation(const struct DmonModel *model);

/**
 * Name of class `index`, or null when out of range. The string lives as
 * long as the handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
const char *dmon_model_label_name(const struct DmonModel *model, size_t index);

/**
 * Predicts labels for a precomputed `n × n × d` pair tensor laid out
 * row-major as `[head][tail][channel]`. Writes `n * n` class indices.
 *
 * # Safety
 * `tensor` must hold `n * n * d` values and `out_labels` room for `n * n`.
 */
enum DmonStatus dmon_model_predict_tensor(const struct DmonModel *model,
                                          size_t n,
                                          size_t d,
                                          const double *tensor,
                                          uint32_t *out_labels);

/**
 * Encodes `n` sentences with the model's own encoder and predicts every
 * ordered pair. Writes `n * n` class indices, row = head, column = tail.
 *
 * # Safety
 * `sentences` must hold `n` NUL-terminated strings and `out_labels` room
 * for `n * n` values.
 */
enum DmonStatus dmon_model_predict_sentences(const struct DmonModel *model,
                                             const char *const *sentences,
                                             size_t n,
                                             uint32_t *out_labels);

/**
 * Top-1 minus top-2 softmax probability of `l` logits.
 *
 * # Safety
 * `logits` must hold `l` values and `out` be a valid pointer.
 */
enum DmonStatus dmon_confidence_margin(const double *logits, size_t l, double *out);

/**
 * Fuses two `m × m × l` logit grids cell by cell: the branch with the
 * larger margin supplies the label, ties go to the head. `out_source` may
 * be null.
 *
 * # Safety
 * `head` and `tail` must hold `m * m * l` values, `out_labels` room for
 * `m * m`, and `out_source` null or room for `m * m`.
 */
enum DmonStatus dmon_fuse(const double *head,
                          const double *tail,
                          size_t m,
                          size_t l,
                          uint32_t *out_labels,
                          enum DmonBranch *out_source);

/**
 * Generates a synthetic corpus as JSONL. `rule` is `"chain"` or `"star"`.
 * The string written to `out` must be released with [`dmon_string_free`].
 *
 * # Safety
 * `rule` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DmonStatus dmon_synth_jsonl(size_t num_docs,
                                 size_t min_sentences,
                                 size_t max_sentences,
                                 const char *rule,
                                 uint64_t seed,
                                 char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void dmon_string_free(char *s);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *dmon_last_error(void);

/**
 * Library version as a static string.
 */
const char *dmon_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMON_H */
