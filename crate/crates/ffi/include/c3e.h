#ifndef C3E_H
#define C3E_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  C3E_GRAPH_FORMAT_EDGE_LIST = 0,
  C3E_GRAPH_FORMAT_MATRIX_MARKET = 1,
} C3eGraphFormat;

typedef enum {
  C3E_NODE_WEIGHT_UNIFORM = 0,
  C3E_NODE_WEIGHT_DEGREE = 1,
} C3eNodeWeight;

typedef enum {
  C3E_REGIME_WIDE = 0,
  C3E_REGIME_NARROW = 1,
} C3eRegime;

typedef enum {
  C3E_STATUS_OK = 0,
  C3E_STATUS_NULL_POINTER = 1,
  C3E_STATUS_INVALID_INPUT = 2,
  C3E_STATUS_DEGENERATE = 3,
  C3E_STATUS_IO = 4,
  C3E_STATUS_PANIC = 5,
} C3eStatus;

/**
 * Opaque graph handle.
 */
typedef struct C3eGraph C3eGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Owned by the
 * library and valid until the next call on the same thread.
 */
const char *c3e_last_error(void);

void c3e_string_free(char *s);

/**
 * Loads a graph file. `n` = 0 infers the node count.
 */
C3eStatus c3e_graph_load(const char *path,
                         C3eGraphFormat format,
                         size_t n,
                         bool directed,
                         C3eGraph **out);

/**
 * Builds a graph from `len` edges `(src[i], dst[i])` on nodes `0..n`.
 */
C3eStatus c3e_graph_from_edges(size_t n,
                               const size_t *src,
                               const size_t *dst,
                               size_t len,
                               bool directed,
                               C3eGraph **out);

void c3e_graph_free(C3eGraph *g);

C3eStatus c3e_graph_node_count(const C3eGraph *g, size_t *out);

C3eStatus c3e_graph_edge_count(const C3eGraph *g, size_t *out);

/**
 * Generalized graph entropy in nats.
 */
C3eStatus c3e_graph_entropy(const C3eGraph *g, C3eNodeWeight weight, double *out);

/**
 * Writes the `depth` per-layer operator variances into `out`. A null
 * `spec_json` selects the GCN operator.
 */
C3eStatus c3e_layer_variances(const C3eGraph *g, const char *spec_json, size_t depth, double *out);

/**
 * φ for widths `w_0..w_depth` and variances `σ²_1..σ²_depth`.
 */
C3eStatus c3e_channel_capacity(size_t n,
                               const double *widths,
                               size_t depth,
                               const double *sigma2,
                               double *out);

/**
 * Compression ratio θ = φ / w̄.
 */
C3eStatus c3e_compression_ratio(size_t n,
                                const double *widths,
                                size_t depth,
                                const double *sigma2,
                                double *out);

C3eStatus c3e_width_threshold(size_t n,
                              const double *widths,
                              size_t depth,
                              const double *sigma2,
                              double *out);

/**
 * Effective capacity φ₀. `per_layer` may be null; otherwise it receives
 * `depth` contributions.
 */
C3eStatus c3e_effective_capacity(size_t n,
                                 const double *widths,
                                 size_t depth,
                                 const double *sigma2,
                                 double *out,
                                 double *per_layer);

C3eStatus c3e_depth_regime(size_t n,
                           const double *widths,
                           size_t depth,
                           const double *sigma2,
                           C3eRegime *out);

/**
 * Plans widths and depth for graph statistics with a constant operator
 * variance. `config_json` is a solver configuration object (`eta` required).
 * The plan comes back as JSON in `*out`; free it with [`c3e_string_free`].
 */
C3eStatus c3e_plan_json(size_t n,
                        double sigma2,
                        size_t m,
                        size_t num_classes,
                        const char *config_json,
                        char **out);

/**
 * As [`c3e_plan_json`], with variances taken from the graph's operators.
 */
C3eStatus c3e_plan_graph_json(const C3eGraph *g,
                              size_t m,
                              size_t num_classes,
                              const char *spec_json,
                              const char *config_json,
                              char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* C3E_H */
