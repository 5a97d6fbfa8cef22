#ifndef RELU_FORGE_H
#define RELU_FORGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RfStatus {
  RF_STATUS_OK = 0,
  RF_STATUS_NULL_POINTER = 1,
  RF_STATUS_INVALID_INPUT = 2,
  RF_STATUS_PARSE = 3,
  RF_STATUS_RESOURCE = 4,
  RF_STATUS_INFEASIBLE = 5,
  RF_STATUS_DIVERGENCE = 6,
  RF_STATUS_IO = 7,
  RF_STATUS_PANIC = 8,
} RfStatus;

/**
 * Opaque labelled point set.
 */
typedef struct RfDataset RfDataset;

/**
 * Opaque ReLU network.
 */
typedef struct RfNet RfNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library from the same thread.
 */
const char *rf_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rf_string_free(char *s);

/**
 * Parses a net from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum RfStatus rf_net_from_json(const char *json, struct RfNet **out);

/**
 * Serializes a net; free the result with [`rf_string_free`].
 *
 * # Safety
 * `net` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_net_to_json(const struct RfNet *net, char **out);

/**
 * Frees a net. Null is ignored.
 *
 * # Safety
 * `net` must come from this library and not have been freed.
 */
void rf_net_free(struct RfNet *net);

/**
 * Input dimension, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rf_net_input_dim(const struct RfNet *net);

/**
 * Hidden-layer count, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rf_net_depth(const struct RfNet *net);

/**
 * Free-parameter count, or 0 for a null handle.
 *
 * # Safety
 * `net` must be null or a live handle.
 */
size_t rf_net_param_count(const struct RfNet *net);

/**
 * Evaluates the net at `x[0..len]`.
 *
 * # Safety
 * `x` must point to `len` readable doubles; `out` must be writable.
 */
enum RfStatus rf_net_evaluate(const struct RfNet *net, const double *x, size_t len, double *out);

/**
 * Evaluates `rows` points stored row-major in `xs` (`rows × cols`) into
 * `out[0..rows]`.
 *
 * # Safety
 * `xs` must hold `rows · cols` doubles and `out` room for `rows`.
 */
enum RfStatus rf_net_evaluate_batch(const struct RfNet *net,
                                    const double *xs,
                                    size_t rows,
                                    size_t cols,
                                    double *out);

/**
 * Net equal to 1 on `[a,b]^dim` and 0 outside `[a−τ, b+τ]^dim`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfStatus rf_bump_net(double a, double b, double tau, size_t dim, struct RfNet **out);

/**
 * Scalar identity of the given depth.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfStatus rf_identity_net(size_t depth, struct RfNet **out);

/**
 * Two-input product gate with uniform error at most `nu` on `[−1,1]²`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfStatus rf_pair_gate(double nu, struct RfNet **out);

/**
 * `ell`-input product gate. With `log_depth` set, the gate is a balanced
 * tree of pair gates and `theta`, `tilde_l` are ignored.
 *
 * # Safety
 * `out` must be writable.
 */
enum RfStatus rf_multi_gate(size_t ell,
                            double nu,
                            double theta,
                            size_t tilde_l,
                            bool log_depth,
                            struct RfNet **out);

/**
 * Dataset of `m` points of dimension `d`, stored row-major in `points`,
 * with `labels[0..m]`.
 *
 * # Safety
 * `points` must hold `m · d` doubles and `labels` `m`; `out` must be writable.
 */
enum RfStatus rf_dataset_new(const double *points,
                             const double *labels,
                             size_t m,
                             size_t d,
                             struct RfDataset **out);

/**
 * Frees a dataset. Null is ignored.
 *
 * # Safety
 * `ds` must come from this library and not have been freed.
 */
void rf_dataset_free(struct RfDataset *ds);

/**
 * Half the smallest pairwise distance of the dataset's points.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_separation_radius(const struct RfDataset *ds, double *out);

/**
 * Deepens `teacher` into a net that interpolates `ds` exactly and stays
 * within `C′ε` of the teacher in `L^p`.
 *
 * # Safety
 * `teacher` and `ds` must be live handles; `out` must be writable.
 */
enum RfStatus rf_deepen(const struct RfNet *teacher,
                        const struct RfDataset *ds,
                        double epsilon,
                        double p,
                        double theta,
                        size_t tilde_l,
                        bool fully_connected,
                        struct RfNet **out);

/**
 * Sum of bumps of width `tau` through the data.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum RfStatus rf_bad_interpolant(const struct RfDataset *ds, double tau, struct RfNet **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELU_FORGE_H */
