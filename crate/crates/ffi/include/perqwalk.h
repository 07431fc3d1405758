#ifndef PERQWALK_H
#define PERQWALK_H

/* Generated by cbindgen from perqwalk-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Opaque ensemble-run handle.
typedef struct PqEnsemble PqEnsemble;

// Opaque graph handle.
typedef struct PqGraph PqGraph;

// Opaque search-run handle.
typedef struct PqSearch PqSearch;

// Noise environment passed by value across the ABI.
typedef struct PqNoiseParams {
  // Strength in units of the base coupling, in `[0, 1]`.
  double nu;
  // Telegraph switching rate, positive when `nu > 0`.
  double gamma;
  // Neighbor-edge correlation probability for spatial domains.
  double correlation_p;
  // 0 = tunneling, 1 = on-site, 2 = both.
  int32_t target;
  // Master seed for all derived streams.
  uint64_t seed;
} PqNoiseParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Line graph on `n` nodes, closed into a ring when `periodic`.
int32_t pq_graph_line(size_t n, bool periodic, struct PqGraph **out);

// Complete graph on `n` nodes.
int32_t pq_graph_complete(size_t n, struct PqGraph **out);

// Star graph on `n` nodes; node 0 is the hub.
int32_t pq_graph_star(size_t n, struct PqGraph **out);

// Load the `n=<count>` + `j k` edge-list format from `path`.
//
// # Safety
// `path` must be a valid NUL-terminated string.
int32_t pq_graph_from_edge_list(const char *path, struct PqGraph **out);

// Release a graph handle; `graph` may be null.
//
// # Safety
// `graph` must come from a `pq_graph_*` constructor and not be freed twice.
void pq_graph_free(struct PqGraph *graph);

// Number of nodes; 0 for a null handle.
//
// # Safety
// `graph` must be a live handle or null.
size_t pq_graph_node_count(const struct PqGraph *graph);

// Number of edges; 0 for a null handle.
//
// # Safety
// `graph` must be a live handle or null.
size_t pq_graph_edge_count(const struct PqGraph *graph);

// Write the `n x n` Laplacian row-major into `out` (length `n * n`).
//
// # Safety
// `out` must point to at least `n * n` doubles.
int32_t pq_graph_laplacian(const struct PqGraph *graph, double *out);

// Ensemble-average a walker released at the chain center: `trajectories`
// noise realizations, `samples` uniform times on `[0, t_max]`.
//
// # Safety
// `graph` and `noise` must be live pointers; `out` must be writable.
int32_t pq_line_spread_run(const struct PqGraph *graph,
                           const struct PqNoiseParams *noise,
                           size_t trajectories,
                           double t_max,
                           size_t samples,
                           struct PqEnsemble **out);

// Number of sample times in an ensemble result.
//
// # Safety
// `ens` must be a live handle or null.
size_t pq_ensemble_sample_count(const struct PqEnsemble *ens);

// Copy the sample times (length `pq_ensemble_sample_count`).
//
// # Safety
// `out` must point to enough doubles.
int32_t pq_ensemble_times(const struct PqEnsemble *ens, double *out);

// Copy the spreading variance and its standard error (length
// `pq_ensemble_sample_count` each; either pointer may be null to skip).
//
// # Safety
// Non-null pointers must reference enough doubles.
int32_t pq_ensemble_variance(const struct PqEnsemble *ens, double *mean, double *stderr);

// Copy the averaged position distribution at one sample index (length =
// node count).
//
// # Safety
// `out` must point to `node_count` doubles.
int32_t pq_ensemble_distribution(const struct PqEnsemble *ens, size_t sample_index, double *out);

// Release an ensemble handle; `ens` may be null.
//
// # Safety
// `ens` must come from `pq_line_spread_run` and not be freed twice.
void pq_ensemble_free(struct PqEnsemble *ens);

// Run a (noisy) spatial search from the uniform superposition.
//
// `t_grid` may be null, in which case the default grid (400 points to
// `3 (pi/2) sqrt(N)`) is used; a custom grid must be increasing and span at
// least twice the optimal time.
//
// # Safety
// `graph` and `noise` must be live; `t_grid`, when non-null, must hold
// `grid_len` doubles; `out` must be writable.
int32_t pq_search_run(const struct PqGraph *graph,
                      size_t target,
                      double coupling,
                      const struct PqNoiseParams *noise,
                      size_t trajectories,
                      const double *t_grid,
                      size_t grid_len,
                      struct PqSearch **out);

// Peak averaged success probability.
//
// # Safety
// `search` must be a live handle or null.
double pq_search_p_succ(const struct PqSearch *search);

// Grid time of the peak.
//
// # Safety
// `search` must be a live handle or null.
double pq_search_t_opt(const struct PqSearch *search);

// Repeat-until-success running time `t_opt / p_succ`.
//
// # Safety
// `search` must be a live handle or null.
double pq_search_t_avg(const struct PqSearch *search);

// Number of grid points in the search curve.
//
// # Safety
// `search` must be a live handle or null.
size_t pq_search_grid_len(const struct PqSearch *search);

// Copy the averaged curve; any of the pointers may be null to skip that
// column. Arrays have length `pq_search_grid_len`.
//
// # Safety
// Non-null pointers must reference enough doubles.
int32_t pq_search_curve(const struct PqSearch *search, double *t, double *p_w, double *p_w_stderr);

// Release a search handle; `search` may be null.
//
// # Safety
// `search` must come from `pq_search_run` and not be freed twice.
void pq_search_free(struct PqSearch *search);

// Closed-form complete-graph success probability at `J = 1/N`.
double pq_grover_probability(size_t n, double t);

// First Grover peak time `(pi/2) sqrt(N)`.
double pq_optimal_time(size_t n);

// Expected correlation-domain length for merge probability `p` over
// `n_edges` chain edges.
double pq_mean_domain_length(double p, size_t n_edges);

// Library version as a static NUL-terminated string.
const char *pq_version(void);

// Static message for a status code.
const char *pq_error_message(int32_t code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERQWALK_H */
