#ifndef MVAP_H
#define MVAP_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MvapStatus {
  MVAP_STATUS_OK = 0,
  MVAP_STATUS_NULL_POINTER = 1,
  MVAP_STATUS_INVALID_PARAM = 2,
  MVAP_STATUS_INVALID_ACTION = 3,
  MVAP_STATUS_NOT_RESET = 4,
  MVAP_STATUS_CONFIG = 5,
  MVAP_STATUS_NON_STOCHASTIC_ROW = 6,
  MVAP_STATUS_ZERO_RATE = 7,
  MVAP_STATUS_NUMERIC = 8,
  MVAP_STATUS_BUFFER_TOO_SMALL = 9,
  MVAP_STATUS_UTF8 = 10,
  MVAP_STATUS_IO = 11,
  MVAP_STATUS_PANIC = 99,
} MvapStatus;

/**
 * Algorithm selector for [`mvap_train`].
 */
typedef enum MvapAlgorithm {
  MVAP_ALGORITHM_QL = 0,
  MVAP_ALGORITHM_DQN = 1,
  MVAP_ALGORITHM_DDQN = 2,
  MVAP_ALGORITHM_RM = 3,
} MvapAlgorithm;

/**
 * Opaque SINR Markov chain plus its random stream.
 */
typedef struct MvapChain MvapChain;

/**
 * Opaque environment plus its random streams.
 */
typedef struct MvapEnv MvapEnv;

/**
 * Observable state of the environment (raw units).
 */
typedef struct MvapState {
  double b_total_bits;
  double sinr_db;
  double t_total_prev_s;
  double f_mvap_hz;
  double f_ecs_hz;
} MvapState;

typedef struct MvapStepResult {
  struct MvapState next_state;
  double reward;
  double t_total_s;
  double t_sensing_comm_s;
  double t_local_s;
  double t_offloading_ecs_s;
  double b_offload_bits;
  double b_local_bits;
  /**
   * 1 when the latency requirement was missed.
   */
  uint8_t violated;
  /**
   * 1 on the last step of the episode.
   */
  uint8_t terminal;
} MvapStepResult;

typedef struct MvapEpisodeRecord {
  uint64_t episode;
  double reward_total;
  double reward_mean;
  uint64_t violations;
  double mean_t_total;
  double epsilon;
} MvapEpisodeRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t mvap_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mvap_version(void);

/**
 * Number of features produced by [`mvap_env_features`].
 */
size_t mvap_feature_count(void);

/**
 * Creates an environment. `config_toml` is an experiment config document
 * (only its `[env]` table is used) or null for the defaults.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out` must be a
 * valid pointer. The handle must be released with [`mvap_env_free`].
 */
enum MvapStatus mvap_env_new(const char *config_toml, uint64_t seed, struct MvapEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from [`mvap_env_new`] not yet freed.
 */
void mvap_env_free(struct MvapEnv *env);

/**
 * # Safety
 * `env` must be a live handle or null.
 */
size_t mvap_env_action_count(const struct MvapEnv *env);

/**
 * Starts a new episode and writes its first state.
 *
 * # Safety
 * `env` must be a live handle; `out` must be valid.
 */
enum MvapStatus mvap_env_reset(struct MvapEnv *env, struct MvapState *out);

/**
 * Applies offloading action `action` (0 ..= action_count - 1).
 *
 * # Safety
 * `env` must be a live handle; `out` must be valid.
 */
enum MvapStatus mvap_env_step(struct MvapEnv *env, size_t action, struct MvapStepResult *out);

/**
 * Writes the normalized network features of `state` into `out[0..5]`.
 *
 * # Safety
 * `env` must be a live handle; `state` valid; `out` valid for `len` doubles.
 */
enum MvapStatus mvap_env_features(const struct MvapEnv *env,
                                  const struct MvapState *state,
                                  double *out,
                                  size_t len);

/**
 * Creates a SINR chain over `n` states with a row-major `n x n` transition
 * matrix, starting in state `initial`.
 *
 * # Safety
 * `states_db` valid for `n` doubles, `transition` for `n * n`; `out` valid.
 * Release with [`mvap_chain_free`].
 */
enum MvapStatus mvap_chain_new(const double *states_db,
                               const double *transition,
                               size_t n,
                               size_t initial,
                               uint64_t seed,
                               struct MvapChain **out);

/**
 * # Safety
 * `chain` must be null or a live handle.
 */
void mvap_chain_free(struct MvapChain *chain);

/**
 * Advances one step; writes the new state index and its SINR in dB.
 *
 * # Safety
 * `chain` must be a live handle; outputs may be null.
 */
enum MvapStatus mvap_chain_step(struct MvapChain *chain, size_t *index, double *sinr_db);

/**
 * Trains one algorithm for `episodes` episodes (0 keeps the config value)
 * with `seed`, writing one record per episode into `out`. `written`
 * receives the number of records. Fails with `BufferTooSmall` (and sets
 * `written` to the required count) if `cap` is too small.
 *
 * # Safety
 * `config_toml` null or NUL-terminated; `out` valid for `cap` records;
 * `written` valid.
 */
enum MvapStatus mvap_train(const char *config_toml,
                           enum MvapAlgorithm algorithm,
                           uint64_t seed,
                           size_t episodes,
                           struct MvapEpisodeRecord *out,
                           size_t cap,
                           size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVAP_H */
