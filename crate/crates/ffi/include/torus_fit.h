#ifndef TORUS_FIT_H
#define TORUS_FIT_H

/* Generated by cbindgen from the torus-fit-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INPUT = 2,
  TF_STATUS_DOMAIN = 3,
  TF_STATUS_NUMERICAL = 4,
  TF_STATUS_INFEASIBLE = 5,
  TF_STATUS_IO = 6,
  TF_STATUS_UNSUPPORTED = 7,
  TF_STATUS_PANIC = 8,
} TfStatus;

/**
 * A fitted model.
 */
typedef struct TfModel TfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tf_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *tf_version(void);

/**
 * Fits `n` sites in dimension `m`. `omega` holds `m` bounds, or is NULL for
 * the full kernel, whose series is cut where its tail drops below
 * `tolerance` (a non-positive value selects the default). On success `*out`
 * receives a new handle.
 *
 * # Safety
 * `points` must hold `n * m` doubles, `values` `n` doubles, `omega` (when
 * not NULL) `m` integers, and `out` must be writable.
 */
enum TfStatus tf_fit(size_t m,
                     size_t n,
                     const double *points_ptr,
                     const double *values,
                     uint32_t k,
                     double lambda,
                     const uint32_t *omega,
                     double tolerance,
                     struct TfModel **out);

/**
 * Value of the model at one point of `tf_model_dim` coordinates.
 *
 * # Safety
 * `model` must come from this library; `x` must hold `dim` doubles and `out`
 * must be writable.
 */
enum TfStatus tf_evaluate(const struct TfModel *model, const double *x, double *out);

/**
 * Values at `count` points.
 *
 * # Safety
 * `xs` must hold `count * dim` doubles and `out` room for `count` doubles.
 */
enum TfStatus tf_evaluate_many(const struct TfModel *model,
                               size_t count,
                               const double *xs,
                               double *out);

/**
 * Number of sites; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
size_t tf_model_n(const struct TfModel *model);

/**
 * Dimension; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or come from this library.
 */
size_t tf_model_dim(const struct TfModel *model);

/**
 * Copies the `n` representer coefficients into `out`, which holds `len`
 * doubles.
 *
 * # Safety
 * `out` must have room for `len` doubles.
 */
enum TfStatus tf_model_coeffs(const struct TfModel *model, double *out, size_t len);

/**
 * Writes the model file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum TfStatus tf_model_save(const struct TfModel *model, const char *path);

/**
 * Reads a model file into a new handle.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum TfStatus tf_model_load(const char *path, struct TfModel **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void tf_model_free(struct TfModel *model);

/**
 * Schedule margin `r` for exponents `alpha`, `beta` and order `k`.
 *
 * # Safety
 * `out` must be writable.
 */
enum TfStatus tf_margin(double alpha, double beta, uint32_t k, double *out);

/**
 * Kernel value at `x` (`m` coordinates): truncated when `omega` is given,
 * the full series to within `tolerance` otherwise.
 *
 * # Safety
 * `x` must hold `m` doubles, `omega` (when not NULL) `m` integers.
 */
enum TfStatus tf_kernel_eval(size_t m,
                             uint32_t k,
                             double lambda,
                             const uint32_t *omega,
                             double tolerance,
                             const double *x,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TORUS_FIT_H */
