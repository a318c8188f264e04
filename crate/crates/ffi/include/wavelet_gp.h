#ifndef WAVELET_GP_H
#define WAVELET_GP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WggpStatus {
  WGGP_STATUS_OK = 0,
  WGGP_STATUS_NULL_POINTER = 1,
  WGGP_STATUS_INVALID_ARGUMENT = 2,
  WGGP_STATUS_INVALID_GRAPH = 3,
  WGGP_STATUS_TOO_LARGE = 4,
  WGGP_STATUS_NUMERICAL = 5,
  WGGP_STATUS_IO = 6,
  WGGP_STATUS_BUFFER_TOO_SMALL = 7,
  WGGP_STATUS_PANIC = 8,
} WggpStatus;

typedef enum WggpMother {
  WGGP_MOTHER_MEXICAN_HAT = 0,
  WGGP_MOTHER_MORLET = 1,
} WggpMother;

typedef enum WggpMode {
  WGGP_MODE_EXACT = 0,
  WGGP_MODE_UNIFORM_LS = 1,
  WGGP_MODE_WEIGHTED_LS = 2,
  WGGP_MODE_CHEBYSHEV = 3,
} WggpMode;

typedef struct WggpGraph WggpGraph;

typedef struct WggpModel WggpModel;

/**
 * Filter description: optional low-pass `1/(1+αλ)` plus one band per
 * entry of `betas`.
 */
typedef struct WggpFilter {
  enum WggpMother mother;
  bool has_low_pass;
  double alpha;
  const double *betas;
  size_t n_betas;
} WggpFilter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wggp_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * NUL-terminated) and returns its full length in bytes, excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t wggp_last_error_message(char *buf, size_t len);

/**
 * Builds a graph from parallel edge arrays. `weights` may be null for unit
 * weights.
 *
 * # Safety
 * Arrays must hold `n_edges` elements; `out` must be writable.
 */
enum WggpStatus wggp_graph_new(size_t n_nodes,
                               const size_t *sources,
                               const size_t *targets,
                               const double *weights,
                               size_t n_edges,
                               struct WggpGraph **out);

/**
 * Reads a whitespace-separated edge list.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum WggpStatus wggp_graph_read_edge_list(const char *path, struct WggpGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle from this library, not yet freed.
 */
void wggp_graph_free(struct WggpGraph *graph);

/**
 * Node count, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
size_t wggp_graph_n_nodes(const struct WggpGraph *graph);

/**
 * Ascending Laplacian eigenvalues; `len` must equal the node count.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum WggpStatus wggp_graph_eigenvalues(const struct WggpGraph *graph, double *out, size_t len);

/**
 * Estimated spectral CDF at `samples` points spaced evenly on `[0, 2]`.
 *
 * # Safety
 * `points` and `cdf` must each point to `samples` writable doubles.
 */
enum WggpStatus wggp_graph_density_cdf(const struct WggpGraph *graph,
                                       size_t samples,
                                       size_t probes,
                                       size_t degree,
                                       uint64_t seed,
                                       double *points,
                                       double *cdf);

/**
 * Filter response `g(λ)` at each of `n` eigenvalues.
 *
 * # Safety
 * `lambdas` and `out` must hold `n` doubles.
 */
enum WggpStatus wggp_filter_evaluate(const struct WggpFilter *filter,
                                     const double *lambdas,
                                     double *out,
                                     size_t n);

/**
 * Applies the graph wavelet `W` to a node signal. `degree` is ignored in
 * exact mode.
 *
 * # Safety
 * `signal` and `out` must hold `n` doubles, `n` being the node count.
 */
enum WggpStatus wggp_graph_apply_filter(const struct WggpGraph *graph,
                                        const struct WggpFilter *filter,
                                        enum WggpMode mode,
                                        size_t degree,
                                        const double *signal,
                                        double *out,
                                        size_t n);

/**
 * Fits a GP regression model with identity features by marginal
 * likelihood, starting from `filter` and `noise_variance`.
 *
 * # Safety
 * `train` and `y` must hold `n_train` elements; `out` must be writable.
 */
enum WggpStatus wggp_model_fit(const struct WggpGraph *graph,
                               const struct WggpFilter *filter,
                               enum WggpMode mode,
                               size_t degree,
                               double noise_variance,
                               const size_t *train,
                               const double *y,
                               size_t n_train,
                               size_t restarts,
                               size_t max_iters,
                               uint64_t seed,
                               struct WggpModel **out);

/**
 * Posterior mean and latent variance at `n_query` nodes. `variance` may be
 * null.
 *
 * # Safety
 * `query` and `mean` (and `variance` if non-null) must hold `n_query` elements.
 */
enum WggpStatus wggp_model_predict(const struct WggpModel *model,
                                   const size_t *query,
                                   size_t n_query,
                                   double *mean,
                                   double *variance);

/**
 * Fitted parameters: filter scales (α first when present, then each β)
 * followed by the noise variance. `written` receives the count; when
 * `capacity` is too small nothing is copied and `BufferTooSmall` is returned.
 *
 * # Safety
 * `out` must hold `capacity` doubles; `written` must be writable.
 */
enum WggpStatus wggp_model_params(const struct WggpModel *model,
                                  double *out,
                                  size_t capacity,
                                  size_t *written);

/**
 * Log marginal likelihood of the fitted model.
 *
 * # Safety
 * `out` must be writable.
 */
enum WggpStatus wggp_model_log_marginal_likelihood(const struct WggpModel *model, double *out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void wggp_model_free(struct WggpModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVELET_GP_H */
