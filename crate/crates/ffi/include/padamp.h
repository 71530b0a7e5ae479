#ifndef PADAMP_H
#define PADAMP_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PadampStatus {
  PADAMP_STATUS_OK = 0,
  PADAMP_STATUS_NULL_POINTER = 1,
  PADAMP_STATUS_INVALID_ARGUMENT = 2,
  PADAMP_STATUS_INVALID_HYPER_PARAM = 3,
  PADAMP_STATUS_SHAPE_MISMATCH = 4,
  PADAMP_STATUS_NON_FINITE = 5,
  PADAMP_STATUS_CONFIG = 6,
  PADAMP_STATUS_IO = 7,
  PADAMP_STATUS_PANIC = 8,
} PadampStatus;

/**
 * Opaque optimizer handle.
 */
typedef struct PadampOptimizer PadampOptimizer;

typedef struct PadampHyperParams {
  double eta0;
  double beta1;
  double beta2;
  double lambda;
  double delta;
  double epsilon;
  double p;
  double weight_decay;
  double momentum;
  /**
   * Decay beta1 as `beta1 * lambda^(t-1)` instead of holding it fixed.
   */
  bool beta1_geometric;
} PadampHyperParams;

typedef struct PadampOptions {
  /**
   * `v^p + eps` rather than `(v + eps)^p`.
   */
  bool eps_outside;
  bool projection;
  /**
   * Scale the trigger threshold by the base rate instead of the scheduled one.
   */
  bool trigger_base_lr;
  bool wd_skip_projected;
} PadampOptions;

typedef struct PadampRunSummary {
  uint64_t steps;
  double final_loss;
  /**
   * NaN for objectives without a notion of accuracy.
   */
  double final_accuracy;
  double min_grad_norm_sq;
  bool diagnostics_pass;
} PadampRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next padamp call on the same thread.
 */
const char *padamp_last_error(void);

/**
 * Defaults for an optimizer kind ("padamp", "adamp", "padam", "adam",
 * "amsgrad", "sgdm").
 *
 * # Safety
 * `kind` must be a NUL-terminated string and `out` writable.
 */
enum PadampStatus padamp_hyperparams_default(const char *kind, struct PadampHyperParams *out);

struct PadampOptions padamp_options_default(void);

/**
 * Creates an optimizer over `n_groups` parameter groups whose sizes are
 * given by `group_sizes`. `opts` may be null for the defaults.
 *
 * # Safety
 * `kind` must be a NUL-terminated string, `hp` readable, `opts` null or
 * readable, `group_sizes` valid for `n_groups` reads and `out` writable.
 */
enum PadampStatus padamp_optimizer_new(const char *kind,
                                       const struct PadampHyperParams *hp,
                                       const struct PadampOptions *opts,
                                       const size_t *group_sizes,
                                       size_t n_groups,
                                       struct PadampOptimizer **out);

/**
 * # Safety
 * `opt` must be null or a handle from [`padamp_optimizer_new`] not yet freed.
 */
void padamp_optimizer_free(struct PadampOptimizer *opt);

/**
 * Total number of parameters across groups.
 *
 * # Safety
 * `opt` must be null or a live handle.
 */
size_t padamp_optimizer_dim(const struct PadampOptimizer *opt);

/**
 * Steps taken so far.
 *
 * # Safety
 * `opt` must be null or a live handle.
 */
uint64_t padamp_optimizer_steps(const struct PadampOptimizer *opt);

/**
 * One step. `params` and `grads` hold all groups back to back; `params` is
 * updated in place. If `projected` is non-null it receives one flag per
 * group. On error neither the state nor `params` change.
 *
 * # Safety
 * `opt` must be a live handle, `params` valid for `len` reads and writes,
 * `grads` valid for `len` reads and `projected` null or writable for one
 * bool per group.
 */
enum PadampStatus padamp_optimizer_step(struct PadampOptimizer *opt,
                                        double *params,
                                        const double *grads,
                                        size_t len,
                                        double eta_t,
                                        double p_now,
                                        bool *projected);

/**
 * Cosine similarity of two vectors; 0 when either is zero.
 *
 * # Safety
 * `a` and `b` must be valid for `len` reads, `out` writable.
 */
enum PadampStatus padamp_cosine_similarity(const double *a,
                                           const double *b,
                                           size_t len,
                                           double *out);

/**
 * Removes the component of `x` along `theta`, writing `len` values to `out`.
 *
 * # Safety
 * `theta` and `x` must be valid for `len` reads, `out` for `len` writes.
 */
enum PadampStatus padamp_project_tangent(const double *theta,
                                         const double *x,
                                         size_t len,
                                         double *out);

/**
 * Limit of the momentum to plain-descent squared-norm growth ratio.
 */
double padamp_norm_growth_limit(double beta);

/**
 * Trains from key-value config text (the `run` subcommand's format) and
 * fills `out`. Nothing is written to disk.
 *
 * # Safety
 * `config` must be a NUL-terminated string and `out` writable.
 */
enum PadampStatus padamp_run_config(const char *config, struct PadampRunSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PADAMP_H */
