#ifndef CLINTRAJ_H
#define CLINTRAJ_H

#include <stddef.h>
#include <stdint.h>

typedef enum ClintrajStatus {
  CLINTRAJ_STATUS_OK = 0,
  CLINTRAJ_STATUS_NULL_POINTER = 1,
  CLINTRAJ_STATUS_INVALID_ARGUMENT = 2,
  CLINTRAJ_STATUS_BUFFER_TOO_SMALL = 3,
  CLINTRAJ_STATUS_NOT_A_TREE = 4,
  CLINTRAJ_STATUS_SINGULAR = 5,
  CLINTRAJ_STATUS_IO = 6,
  CLINTRAJ_STATUS_PANIC = 7,
} ClintrajStatus;

/**
 * Opaque principal graph.
 */
typedef struct ClintrajGraph ClintrajGraph;

/**
 * Elastic energy coefficients. A non-finite `r0` disables trimming.
 */
typedef struct ClintrajElasticParams {
  double lambda;
  double mu;
  double alpha;
  double r0;
  size_t n_nodes;
} ClintrajElasticParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default elastic coefficients.
 */
struct ClintrajElasticParams clintraj_default_params(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *clintraj_last_error(void);

/**
 * Grows a principal tree on row-major `data` (`rows` x `dim`), then
 * prunes short leaves and extends the remaining ones.
 *
 * # Safety
 * `data` must point to `rows * dim` readable doubles, `params` to a valid
 * struct and `out` to writable storage for one pointer.
 */
enum ClintrajStatus clintraj_fit_tree(const double *data,
                                      size_t rows,
                                      size_t dim,
                                      const struct ClintrajElasticParams *params,
                                      uint64_t seed,
                                      struct ClintrajGraph **out);

/**
 * Releases a graph. Passing NULL is a no-op.
 *
 * # Safety
 * `g` must be NULL or a handle returned by this library that has not
 * been freed.
 */
void clintraj_graph_free(struct ClintrajGraph *g);

/**
 * Number of nodes, or 0 for NULL.
 *
 * # Safety
 * `g` must be NULL or a live handle.
 */
size_t clintraj_graph_n_nodes(const struct ClintrajGraph *g);

/**
 * Number of edges, or 0 for NULL.
 *
 * # Safety
 * `g` must be NULL or a live handle.
 */
size_t clintraj_graph_n_edges(const struct ClintrajGraph *g);

/**
 * Embedding dimension, or 0 for NULL.
 *
 * # Safety
 * `g` must be NULL or a live handle.
 */
size_t clintraj_graph_dim(const struct ClintrajGraph *g);

/**
 * Copies node positions (row-major, `n_nodes * dim`) into `out`.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum ClintrajStatus clintraj_graph_nodes(const struct ClintrajGraph *g, double *out, size_t len);

/**
 * Copies edges as consecutive node index pairs (`2 * n_edges` values).
 *
 * # Safety
 * `out` must point to `len` writable `size_t` values.
 */
enum ClintrajStatus clintraj_graph_edges(const struct ClintrajGraph *g, size_t *out, size_t len);

/**
 * Fraction of the total variance of `data` explained by the graph.
 *
 * # Safety
 * `data` must point to `rows * dim` readable doubles and `out` to one
 * writable double.
 */
enum ClintrajStatus clintraj_explained_variance(const struct ClintrajGraph *g,
                                                const double *data,
                                                size_t rows,
                                                size_t dim,
                                                double *out);

/**
 * Pseudotime of every row measured in edge counts from `root`. Writes
 * `rows` values into `pt` and the number of root-to-leaf trajectories
 * into `n_trajectories` when it is not NULL.
 *
 * # Safety
 * `data` must point to `rows * dim` readable doubles, `pt` to `rows`
 * writable doubles.
 */
enum ClintrajStatus clintraj_pseudotime(const struct ClintrajGraph *g,
                                        const double *data,
                                        size_t rows,
                                        size_t dim,
                                        size_t root,
                                        double *pt,
                                        size_t *n_trajectories);

/**
 * Serializes a graph to JSON. Free the string with
 * [`clintraj_string_free`].
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
enum ClintrajStatus clintraj_graph_to_json(const struct ClintrajGraph *g, char **out);

/**
 * Parses a graph from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable storage for
 * one pointer.
 */
enum ClintrajStatus clintraj_graph_from_json(const char *json, struct ClintrajGraph **out);

/**
 * Releases a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void clintraj_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLINTRAJ_H */
