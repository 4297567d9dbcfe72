#ifndef EBCSL_H
#define EBCSL_H

#pragma once

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum EbcslStatus {
  EBCSL_STATUS_OK = 0,
  EBCSL_STATUS_NULL_POINTER = 1,
  EBCSL_STATUS_INVALID_ARGUMENT = 2,
  EBCSL_STATUS_CONFIG = 3,
  EBCSL_STATUS_IO = 4,
  EBCSL_STATUS_CONTRACT = 5,
  EBCSL_STATUS_INFEASIBLE = 6,
  EBCSL_STATUS_CHECKPOINT = 7,
  /**
   * The call was made before `ebcsl_env_reset` or after the episode ended.
   */
  EBCSL_STATUS_NO_EPISODE = 8,
  EBCSL_STATUS_INTERNAL = 9,
} EbcslStatus;

/**
 * Simulator with its current state and random stream.
 */
typedef struct EbcslEnv EbcslEnv;

/**
 * Frozen policy loaded from a checkpoint.
 */
typedef struct EbcslPolicy EbcslPolicy;

/**
 * Outcome of one step.
 */
typedef struct EbcslStepResult {
  double reward;
  double safety_cost;
  /**
   * Non-zero once the horizon is reached.
   */
  uint8_t done;
  /**
   * Non-zero when some bus changed status.
   */
  uint8_t forced_termination;
} EbcslStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the calling thread; valid until the next failing
 * call on that thread.
 */
const char *ebcsl_last_error(void);

/**
 * Creates a simulator from an experiment file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EbcslStatus ebcsl_env_new_from_file(const char *path, struct EbcslEnv **out);

/**
 * Creates a simulator from experiment TOML text; relative trace paths
 * resolve against `base_dir`, or the working directory when null.
 *
 * # Safety
 * `toml` (and `base_dir` when non-null) must be NUL-terminated strings and
 * `out` a valid pointer.
 */
enum EbcslStatus ebcsl_env_new_from_toml(const char *toml,
                                         const char *base_dir,
                                         struct EbcslEnv **out);

/**
 * # Safety
 * `env` must come from an `ebcsl_env_new_*` call and not be used afterwards.
 */
void ebcsl_env_free(struct EbcslEnv *env);

/**
 * Number of buses, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
uintptr_t ebcsl_env_fleet_size(const struct EbcslEnv *env);

/**
 * Steps per episode, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
uintptr_t ebcsl_env_horizon(const struct EbcslEnv *env);

/**
 * Starts an episode on the random stream `seed`.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum EbcslStatus ebcsl_env_reset(struct EbcslEnv *env, uint64_t seed);

/**
 * Copies per-bus energy (kWh) and status (1 = at the terminal) of the
 * current state; either output may be null.
 *
 * # Safety
 * Non-null outputs must hold `len` elements; `env` must be a live handle.
 */
enum EbcslStatus ebcsl_env_observe(const struct EbcslEnv *env,
                                   double *energy_kwh,
                                   uint8_t *layover,
                                   uintptr_t len,
                                   uintptr_t *t);

/**
 * Feasible power interval of bus `m` in the current state.
 *
 * # Safety
 * `env` must be a live handle; `lo` and `hi` valid pointers.
 */
enum EbcslStatus ebcsl_env_power_range(const struct EbcslEnv *env,
                                       uintptr_t m,
                                       uint8_t allocated,
                                       double *lo,
                                       double *hi);

/**
 * Advances one step. `alloc[m]` non-zero assigns a charger to bus `m`;
 * `powers[m]` is read only for allocated buses.
 *
 * # Safety
 * `alloc` and `powers` must hold `len` elements; `env` must be a live
 * handle; `out` may be null.
 */
enum EbcslStatus ebcsl_env_step(struct EbcslEnv *env,
                                const uint8_t *alloc,
                                const double *powers,
                                uintptr_t len,
                                struct EbcslStepResult *out);

/**
 * Charging cost of one step: `price (p_buy - sell_discount p_sell) dt`.
 */
double ebcsl_charging_cost(double price,
                           double p_buy,
                           double p_sell,
                           double sell_discount,
                           double dt_hours);

/**
 * Energy shortfall below `floor_kwh`, summed over `len` buses.
 *
 * # Safety
 * `energy_kwh` must hold `len` elements.
 */
double ebcsl_safety_shortfall(const double *energy_kwh, uintptr_t len, double floor_kwh);

/**
 * Projected multiplier step `max(0, lambda + lr (j_safe - tolerance))`.
 */
double ebcsl_dual_step(double lambda, double lr, double j_safe, double tolerance);

/**
 * Loads a policy bundle for the scenario of `env`.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `env` a live handle and `out` a
 * valid pointer.
 */
enum EbcslStatus ebcsl_policy_load(const char *path,
                                   const struct EbcslEnv *env,
                                   uintptr_t enumeration_cap,
                                   struct EbcslPolicy **out);

/**
 * # Safety
 * `policy` must come from `ebcsl_policy_load` and not be used afterwards.
 */
void ebcsl_policy_free(struct EbcslPolicy *policy);

/**
 * Greedy allocation and powers for the current state of `env`, ready to
 * pass to `ebcsl_env_step`. Draws from the random stream of `env`.
 *
 * # Safety
 * `alloc` and `powers` must hold `len` elements; handles must be live.
 */
enum EbcslStatus ebcsl_policy_act(const struct EbcslPolicy *policy,
                                  struct EbcslEnv *env,
                                  uint8_t *alloc,
                                  double *powers,
                                  uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EBCSL_H */
