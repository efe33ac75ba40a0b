#ifndef MAXIMIN_NORMS_H
#define MAXIMIN_NORMS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MN_OK 0

/**
 * A required pointer was NULL.
 */
#define MN_ERR_NULL 1

/**
 * Invalid argument, configuration or contract violation.
 */
#define MN_ERR_INVALID 2

#define MN_ERR_IO 3

/**
 * Training produced a non-finite loss.
 */
#define MN_ERR_TRAINING 4

/**
 * The quantity is undefined for these inputs (e.g. zero pooled SD).
 */
#define MN_ERR_UNDEFINED 5

/**
 * The episode has ended; reset before stepping again.
 */
#define MN_ERR_EPISODE_OVER 6

/**
 * Internal panic caught at the boundary.
 */
#define MN_ERR_PANIC 7

/**
 * Experiment configuration handle.
 */
typedef struct MnConfig MnConfig;

/**
 * One society advanced step by step.
 */
typedef struct MnSimulation MnSimulation;

/**
 * Measurements over alive agents after one step.
 */
typedef struct MnStepMetrics {
  double gini_wellbeing;
  double min_wellbeing;
  double welfare_wellbeing;
  double gini_resource;
  double min_resource;
  double welfare_resource;
} MnStepMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mn_last_error(void);

/**
 * # Safety
 * `values` must point to `len` doubles; `result` must be writable.
 */
int32_t mn_gini(const double *values, size_t len, double *result);

/**
 * Two-sided Mann-Whitney test; `u` is the statistic of sample `a`.
 *
 * # Safety
 * `a` and `b` must point to `len_a` and `len_b` doubles; `u` and `p` must
 * be writable.
 */
int32_t mn_mann_whitney(const double *a,
                        size_t len_a,
                        const double *b,
                        size_t len_b,
                        double *u,
                        double *p);

/**
 * # Safety
 * As for [`mn_mann_whitney`]; `d` must be writable.
 */
int32_t mn_cohens_d(const double *a, size_t len_a, const double *b, size_t len_b, double *d);

/**
 * Cohen's d of two equal-size groups given as mean and SD.
 *
 * # Safety
 * `d` must be writable.
 */
int32_t mn_cohens_d_from_summary(double mean_a, double sd_a, double mean_b, double sd_b, double *d);

/**
 * Default configuration for `"capabilities"` or `"allotment"`. NULL on
 * failure.
 *
 * # Safety
 * `scenario` must be a NUL-terminated string.
 */
struct MnConfig *mn_config_new(const char *scenario);

/**
 * Defaults overlaid with a flat key-value config file. NULL on failure.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
struct MnConfig *mn_config_load(const char *path);

/**
 * # Safety
 * `cfg` must come from `mn_config_new` or `mn_config_load`.
 */
int32_t mn_config_set_episodes(struct MnConfig *cfg, size_t train, size_t eval);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
int32_t mn_config_set_seed(struct MnConfig *cfg, uint64_t seed, size_t replicates);

/**
 * `"baseline"`, `"rawle"` or `"both"`.
 *
 * # Safety
 * `cfg` must be a live config handle and `society` a NUL-terminated string.
 */
int32_t mn_config_set_society(struct MnConfig *cfg, const char *society);

/**
 * Set `t_max`, the step limit of an episode.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
int32_t mn_config_set_t_max(struct MnConfig *cfg, size_t t_max);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void mn_config_free(struct MnConfig *cfg);

/**
 * Train, evaluate and write all result files to `out_dir`.
 *
 * # Safety
 * `cfg` must be a live config handle and `out_dir` a NUL-terminated string.
 */
int32_t mn_run_experiment(const struct MnConfig *cfg, const char *out_dir);

/**
 * A fresh society (`"baseline"` or `"rawle"`) on its first grid. The
 * configuration is copied. NULL on failure.
 *
 * # Safety
 * `cfg` must be a live config handle and `society` a NUL-terminated string.
 */
struct MnSimulation *mn_simulation_new(const struct MnConfig *cfg,
                                       const char *society,
                                       uint64_t seed);

/**
 * Advance one step. With `train` nonzero the agents learn; `epsilon` is
 * the exploration rate. `metrics` may be NULL. Returns
 * `MN_ERR_EPISODE_OVER` once the episode has ended.
 *
 * # Safety
 * `sim` must be a live simulation handle; `metrics` NULL or writable.
 */
int32_t mn_simulation_step(struct MnSimulation *sim,
                           double epsilon,
                           int32_t train,
                           struct MnStepMetrics *metrics);

/**
 * Start a new episode; networks and replay memories are kept.
 *
 * # Safety
 * `sim` must be a live simulation handle.
 */
int32_t mn_simulation_reset(struct MnSimulation *sim);

/**
 * Nonzero once the current episode has ended; 0 otherwise or for NULL.
 *
 * # Safety
 * `sim` must be NULL or a live simulation handle.
 */
int32_t mn_simulation_is_done(const struct MnSimulation *sim);

/**
 * Steps completed in the current episode.
 *
 * # Safety
 * `sim` must be a live simulation handle; `steps` writable.
 */
int32_t mn_simulation_step_index(const struct MnSimulation *sim, size_t *steps);

/**
 * Write each agent's well-being (0 for dead agents) into `values`, which
 * holds `capacity` doubles. `written` receives the number of agents; if it
 * exceeds `capacity` nothing is copied and `MN_ERR_INVALID` is returned.
 *
 * # Safety
 * `sim` must be a live simulation handle, `values` must hold `capacity`
 * doubles and `written` must be writable.
 */
int32_t mn_simulation_wellbeing(const struct MnSimulation *sim,
                                double *values,
                                size_t capacity,
                                size_t *written);

/**
 * # Safety
 * `sim` must be NULL or a handle not yet freed.
 */
void mn_simulation_free(struct MnSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAXIMIN_NORMS_H */
