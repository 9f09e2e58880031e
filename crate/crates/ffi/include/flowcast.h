#ifndef FLOWCAST_H
#define FLOWCAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_POINTER = 1,
  FC_STATUS_INVALID_UTF8 = 2,
  FC_STATUS_IO = 3,
  FC_STATUS_PARSE = 4,
  FC_STATUS_SHAPE = 5,
  FC_STATUS_HASH_MISMATCH = 6,
  FC_STATUS_INVALID = 7,
  FC_STATUS_INTERNAL = 8,
} FcStatus;

/**
 * Street graph with its normalized adjacency.
 */
typedef struct FcGraph FcGraph;

/**
 * Trained recurrent model loaded from a checkpoint.
 */
typedef struct FcModel FcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. Valid until the next failure.
 */
const char *fc_last_error(void);

/**
 * Loads a street graph from `node_id,lat,lon` and `u,v,length_m` CSV files.
 *
 * # Safety
 * Paths must be null or NUL-terminated strings; `out` must be null or writable.
 */
enum FcStatus fc_graph_load(const char *nodes, const char *edges, struct FcGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from [`fc_graph_load`] not yet freed.
 */
void fc_graph_free(struct FcGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_graph_node_count(const struct FcGraph *graph, size_t *out);

/**
 * Id of the node nearest to a WGS84 coordinate by haversine distance.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_graph_nearest_node(const struct FcGraph *graph,
                                    double lat,
                                    double lon,
                                    uint64_t *out);

/**
 * Entry (i, j) of the row-normalized adjacency, by dense node index.
 *
 * # Safety
 * `graph` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_graph_adjacency(const struct FcGraph *graph, size_t i, size_t j, double *out);

/**
 * Loads a checkpoint. Graph models need the graph they were trained on; others accept null.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `graph` null or a live handle, `out` writable.
 */
enum FcStatus fc_model_load(const char *path, const struct FcGraph *graph, struct FcModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`fc_model_load`] not yet freed.
 */
void fc_model_free(struct FcModel *model);

/**
 * Input width, hidden size and output width (POI count).
 *
 * # Safety
 * `model` must be a live handle; each out pointer must be null or writable.
 */
enum FcStatus fc_model_sizes(const struct FcModel *model,
                             size_t *input,
                             size_t *hidden,
                             size_t *output);

/**
 * Runs the model over `steps` scaled input rows and writes `steps × output` scaled predictions.
 *
 * `inputs` is row-major `steps × input`. Graph models also take `observations`, row-major
 * `(steps + 1) × hidden` per-node values: row 0 is the initial state and row t + 1 forces
 * the state after step t. Other models ignore `observations`, which may be null.
 *
 * # Safety
 * Buffers must hold the stated number of elements.
 */
enum FcStatus fc_model_forward(const struct FcModel *model,
                               size_t steps,
                               const double *inputs,
                               const double *observations,
                               double *preds);

/**
 * Mean absolute error of two `len`-element arrays.
 *
 * # Safety
 * Both arrays must hold `len` elements; `out` must be writable.
 */
enum FcStatus fc_mae(const double *pred, const double *target, size_t len, double *out);

/**
 * Root mean squared error of two `len`-element arrays.
 *
 * # Safety
 * Both arrays must hold `len` elements; `out` must be writable.
 */
enum FcStatus fc_rmse(const double *pred, const double *target, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWCAST_H */
