#ifndef EMBREG_H
#define EMBREG_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmbregStatus {
  EMBREG_STATUS_OK = 0,
  EMBREG_STATUS_NULL_POINTER = 1,
  EMBREG_STATUS_INVALID_ARGUMENT = 2,
  EMBREG_STATUS_INVALID_GRAPHON = 3,
  EMBREG_STATUS_INVALID_SCHEME = 4,
  EMBREG_STATUS_MISSING_LATENTS = 5,
  EMBREG_STATUS_NUMERICAL = 6,
  EMBREG_STATUS_BUFFER_TOO_SMALL = 7,
  EMBREG_STATUS_IO = 8,
  EMBREG_STATUS_PANIC = 9,
} EmbregStatus;

typedef enum EmbregSchemeKind {
  EMBREG_SCHEME_KIND_UNIFORM_VERTEX = 0,
  EMBREG_SCHEME_KIND_UNIFORM_EDGE = 1,
  EMBREG_SCHEME_KIND_RANDOM_WALK = 2,
} EmbregSchemeKind;

typedef struct EmbregEmbedding EmbregEmbedding;

typedef struct EmbregGraph EmbregGraph;

typedef struct EmbregGraphon EmbregGraphon;

typedef struct EmbregKernel EmbregKernel;

/**
 * Subsampling scheme; `l` and `alpha` are ignored for uniform vertex sampling.
 */
typedef struct EmbregScheme {
  enum EmbregSchemeKind kind;
  size_t k;
  size_t l;
  double alpha;
} EmbregScheme;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next failing call.
 */
const char *embreg_last_error(void);

const char *embreg_version(void);

enum EmbregStatus embreg_graphon_constant(double p, struct EmbregGraphon **out);

enum EmbregStatus embreg_graphon_smooth_product(double a, double b, struct EmbregGraphon **out);

/**
 * `blocks` is an `m × m` row-major matrix.
 */
enum EmbregStatus embreg_graphon_step_block(const double *blocks,
                                            size_t m,
                                            struct EmbregGraphon **out);

enum EmbregStatus embreg_graphon_set_rho(struct EmbregGraphon *h, double rho);

enum EmbregStatus embreg_graphon_value(const struct EmbregGraphon *h,
                                       double x,
                                       double y,
                                       double *out);

void embreg_graphon_free(struct EmbregGraphon *h);

enum EmbregStatus embreg_graph_sample(const struct EmbregGraphon *spec,
                                      size_t n,
                                      uint64_t seed,
                                      struct EmbregGraph **out);

/**
 * Graph without latents from `m` pairs stored as `[u0, v0, u1, v1, ...]`.
 */
enum EmbregStatus embreg_graph_from_edges(size_t n,
                                          const uint32_t *edges,
                                          size_t m,
                                          struct EmbregGraph **out);

enum EmbregStatus embreg_graph_vertex_count(const struct EmbregGraph *h, size_t *out);

enum EmbregStatus embreg_graph_edge_count(const struct EmbregGraph *h, size_t *out);

/**
 * Writes edges as `[u0, v0, ...]` with `u < v`; `cap` counts `u32` slots.
 */
enum EmbregStatus embreg_graph_edges(const struct EmbregGraph *h, uint32_t *buf, size_t cap);

enum EmbregStatus embreg_graph_latents(const struct EmbregGraph *h, double *buf, size_t cap);

void embreg_graph_free(struct EmbregGraph *h);

/**
 * Full-batch projected gradient on the formula-weighted empirical risk.
 */
enum EmbregStatus embreg_train_full(const struct EmbregGraph *graph,
                                    const struct EmbregGraphon *spec,
                                    struct EmbregScheme scheme,
                                    size_t d,
                                    double xi,
                                    uint64_t seed,
                                    struct EmbregEmbedding **out,
                                    double *objective);

/**
 * Adam over fresh subsamples; `lr <= 0` keeps the default rate.
 */
enum EmbregStatus embreg_train_sgd(const struct EmbregGraph *graph,
                                   struct EmbregScheme scheme,
                                   size_t d,
                                   double xi,
                                   uint64_t seed,
                                   size_t epochs,
                                   size_t runs_per_epoch,
                                   double lr,
                                   struct EmbregEmbedding **out);

/**
 * Embedding from `n·d` row-major values, all within `[-bound, bound]`.
 */
enum EmbregStatus embreg_embedding_from_data(const double *data,
                                             size_t n,
                                             size_t d,
                                             double bound,
                                             struct EmbregEmbedding **out);

enum EmbregStatus embreg_embedding_shape(const struct EmbregEmbedding *h, size_t *n, size_t *d);

/**
 * Copies the `n·d` row-major coordinates.
 */
enum EmbregStatus embreg_embedding_data(const struct EmbregEmbedding *h, double *buf, size_t cap);

void embreg_embedding_free(struct EmbregEmbedding *h);

/**
 * Formula-weighted empirical risk, penalty included.
 */
enum EmbregStatus embreg_empirical_risk(const struct EmbregGraph *graph,
                                        const struct EmbregGraphon *spec,
                                        struct EmbregScheme scheme,
                                        const struct EmbregEmbedding *emb,
                                        double xi,
                                        double *out);

/**
 * Minimizes the discretized population risk over PSD step kernels.
 */
enum EmbregStatus embreg_population_minimize(const struct EmbregGraphon *spec,
                                             struct EmbregScheme scheme,
                                             double rho,
                                             size_t kappa,
                                             double xi,
                                             struct EmbregKernel **out);

enum EmbregStatus embreg_kernel_kappa(const struct EmbregKernel *h, size_t *out);

enum EmbregStatus embreg_kernel_objective(const struct EmbregKernel *h, double *out);

/**
 * Copies the `κ × κ` cell values, row-major.
 */
enum EmbregStatus embreg_kernel_matrix(const struct EmbregKernel *h, double *buf, size_t cap);

enum EmbregStatus embreg_kernel_eval(const struct EmbregKernel *h, double x, double y, double *out);

void embreg_kernel_free(struct EmbregKernel *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMBREG_H */
