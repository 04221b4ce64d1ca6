#ifndef PGSMDP_H
#define PGSMDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum PgsmdpStatus {
  PGSMDP_STATUS_OK = 0,
  // A required pointer was null.
  PGSMDP_STATUS_NULL_ARGUMENT = 1,
  // Bad value, wrong length or out-of-range index.
  PGSMDP_STATUS_INVALID_ARGUMENT = 2,
  // Configuration file could not be parsed or failed validation.
  PGSMDP_STATUS_INVALID_CONFIG = 3,
  PGSMDP_STATUS_IO = 4,
  // Malformed checkpoint or unsupported schema version.
  PGSMDP_STATUS_FORMAT = 5,
  // The output buffer is shorter than required.
  PGSMDP_STATUS_BUFFER_TOO_SMALL = 6,
  // Simulation or numerical failure.
  PGSMDP_STATUS_RUNTIME = 7,
  // A Rust panic was caught at the boundary.
  PGSMDP_STATUS_PANIC = 8,
} PgsmdpStatus;

typedef enum PgsmdpScenario {
  PGSMDP_SCENARIO_LOSING = 0,
  PGSMDP_SCENARIO_WINNING = 1,
} PgsmdpScenario;

// Mini offense simulator with its own random stream.
typedef struct PgsmdpEnv PgsmdpEnv;

// Frozen two-tiered policy loaded from a checkpoint.
typedef struct PgsmdpPolicy PgsmdpPolicy;

// Result of one skill execution.
typedef struct PgsmdpStep {
  uint32_t steps;
  double reward;
  // Nonzero when the episode ended inside the skill.
  int32_t terminal;
} PgsmdpStep;

// Batch metrics, outcome counts per 100 episodes.
typedef struct PgsmdpMetrics {
  uint64_t episodes;
  double goals;
  double captures;
  double out_of_time;
  double avg_reward;
  double avg_episode_length;
} PgsmdpMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *pgsmdp_last_error(void);

// Library version as a static NUL-terminated string.
const char *pgsmdp_version(void);

// Load a policy checkpoint (JSON written by `pgsmdp train`).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum PgsmdpStatus pgsmdp_policy_load(const char *path, struct PgsmdpPolicy **out);

// # Safety
// `policy` must come from [`pgsmdp_policy_load`] and not be used afterwards.
// Null is ignored.
void pgsmdp_policy_free(struct PgsmdpPolicy *policy);

// Number of skills, or 0 for a null handle.
//
// # Safety
// `policy` must be null or a live handle.
size_t pgsmdp_policy_num_skills(const struct PgsmdpPolicy *policy);

// Length of the environment feature vector, or 0 for a null handle.
//
// # Safety
// `policy` must be null or a live handle.
size_t pgsmdp_policy_state_dim(const struct PgsmdpPolicy *policy);

// Skill probabilities at state `{features, w, t}` into `out[0..num_skills]`.
//
// # Safety
// `features` must hold `features_len` doubles and `out` `out_len` doubles.
enum PgsmdpStatus pgsmdp_policy_skill_probs(const struct PgsmdpPolicy *policy,
                                            const double *features,
                                            size_t features_len,
                                            double w,
                                            uint32_t t,
                                            double *out,
                                            size_t out_len);

// Unclamped mean of skill `skill`'s risk-awareness distribution.
//
// # Safety
// `features` must hold `features_len` doubles; `out` must be writable.
enum PgsmdpStatus pgsmdp_policy_rap_mean(const struct PgsmdpPolicy *policy,
                                         const double *features,
                                         size_t features_len,
                                         double w,
                                         uint32_t t,
                                         size_t skill,
                                         double *out);

// Create a mini offense environment. `config_path` may be null for the
// built-in defaults, otherwise it names a TOML run configuration whose
// `[env]`, `[rewards]` and `[episode]` sections are used.
//
// # Safety
// `config_path` must be null or NUL-terminated; `out` must be writable.
enum PgsmdpStatus pgsmdp_env_new(enum PgsmdpScenario scenario,
                                 const char *config_path,
                                 uint64_t seed,
                                 struct PgsmdpEnv **out);

// # Safety
// `env` must come from [`pgsmdp_env_new`] and not be used afterwards.
// Null is ignored.
void pgsmdp_env_free(struct PgsmdpEnv *env);

// Length of the observation vector, or 0 for a null handle.
//
// # Safety
// `env` must be null or a live handle.
size_t pgsmdp_env_state_dim(const struct PgsmdpEnv *env);

// Start a new episode and write the initial observation.
//
// # Safety
// `env` must be a live handle; `out` must hold `out_len` doubles.
enum PgsmdpStatus pgsmdp_env_reset(struct PgsmdpEnv *env, double *out, size_t out_len);

// Execute one skill (0 move, 1 shoot, 2 dribble) with risk-awareness
// parameter `rap`, using at most `max_steps` timesteps. Writes the next
// observation to `obs` and the outcome to `step`.
//
// # Safety
// `env` must be a live handle; `obs` must hold `obs_len` doubles and
// `step` must be writable.
enum PgsmdpStatus pgsmdp_env_execute(struct PgsmdpEnv *env,
                                     size_t skill,
                                     double rap,
                                     uint32_t max_steps,
                                     double *obs,
                                     size_t obs_len,
                                     struct PgsmdpStep *step);

// Roll out `episodes` frozen-policy episodes and summarise them.
// Episode `i` uses random stream `i` of `seed`, so results are
// reproducible and independent of the environment's own stream.
//
// # Safety
// `policy` and `env` must be live handles; `out` must be writable.
enum PgsmdpStatus pgsmdp_evaluate(const struct PgsmdpPolicy *policy,
                                  const struct PgsmdpEnv *env,
                                  uint64_t episodes,
                                  uint64_t seed,
                                  int32_t greedy,
                                  struct PgsmdpMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PGSMDP_H */
