#ifndef POLYMERLAB_H
#define POLYMERLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Codes 2 to 5 match the exit codes of the command line tool.
 */
typedef enum PlStatus {
  PlStatus_Ok = 0,
  PlStatus_InvalidArgument = 2,
  PlStatus_Capacity = 3,
  PlStatus_Infeasible = 4,
  PlStatus_Internal = 5,
  PlStatus_NullPointer = 6,
  PlStatus_Panic = 7,
} PlStatus;

/**
 * A normalized transition kernel.
 */
typedef struct PlKernel PlKernel;

/**
 * Model parameters.
 */
typedef struct PlParams PlParams;

/**
 * An obstacle field on a finite window.
 */
typedef struct PlSlab PlSlab;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *pl_version(void);

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread.
 */
const char *pl_last_error(void);

/**
 * `beta = -INFINITY` selects the hard-obstacle limit.
 */
enum PlStatus pl_params_new(uint32_t d,
                            double alpha,
                            double c2,
                            double p,
                            double beta,
                            double theta,
                            double zeta,
                            struct PlParams **out);

void pl_params_free(struct PlParams *params);

/**
 * `s_p = (log 1/p)^{1/d}`.
 */
enum PlStatus pl_scale_factor(double p, uint32_t d, double *out);

enum PlStatus pl_slab_generate(const struct PlParams *params,
                               uintptr_t n,
                               int64_t half_width,
                               uint64_t seed,
                               struct PlSlab **out);

void pl_slab_free(struct PlSlab *slab);

uintptr_t pl_slab_layers(const struct PlSlab *slab);

int64_t pl_slab_half_width(const struct PlSlab *slab);

/**
 * Writes 1 for an obstacle at `(layer, (x0, x1))`, 0 for an open site.
 * `x1` is ignored when `d = 1`.
 */
enum PlStatus pl_slab_obstacle(const struct PlSlab *slab,
                               uintptr_t layer,
                               int64_t x0,
                               int64_t x1,
                               uint8_t *out);

/**
 * A copy of `slab` with layer `m` redrawn from `fresh_seed`.
 */
enum PlStatus pl_slab_resample_layer(const struct PlSlab *slab,
                                     uintptr_t m,
                                     uint64_t fresh_seed,
                                     struct PlSlab **out);

/**
 * Writes the binary slab to `path` and its JSON sidecar to `path.json`.
 */
enum PlStatus pl_slab_save(const struct PlSlab *slab, const char *path);

enum PlStatus pl_slab_load(const char *path, struct PlSlab **out);

/**
 * Minimum passage time over the first `n` layers, on the raw open sites
 * or on the theta-regularized view. `out_exact` (optional) receives 1
 * when the window provably did not cut off a better path.
 */
enum PlStatus pl_passage_time(const struct PlSlab *slab,
                              const struct PlParams *params,
                              uintptr_t n,
                              bool regularized,
                              double *out_value,
                              uint8_t *out_exact);

/**
 * Kernel normalized so that the truncated mass is below `epsilon`.
 */
enum PlStatus pl_kernel_new(const struct PlParams *params, double epsilon, struct PlKernel **out);

double pl_kernel_c1(const struct PlKernel *kernel);

int64_t pl_kernel_cap(const struct PlKernel *kernel);

void pl_kernel_free(struct PlKernel *kernel);

/**
 * `log Z_n` at the beta stored in `params`; the hard-obstacle sweep when
 * it is `-INFINITY`. `out_certificate` (optional) receives the additive
 * error bound.
 */
enum PlStatus pl_partition(const struct PlSlab *slab,
                           const struct PlParams *params,
                           const struct PlKernel *kernel,
                           uintptr_t n,
                           double *out_log_z,
                           double *out_certificate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYMERLAB_H */
