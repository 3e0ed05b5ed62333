#ifndef GUIRL_H
#define GUIRL_H

/* C interface to the GUI-agent RL toolkit. All functions return GUIRL_OK on
 * success; on failure they return a status code and leave a human-readable
 * message in guirl_last_error() (thread local). Strings returned through
 * char** out parameters are heap allocated and must be released with
 * guirl_string_free(). */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum guirl_status {
    GUIRL_OK = 0,
    GUIRL_ERR_PARSE = 1,
    GUIRL_ERR_DOMAIN = 2,
    GUIRL_ERR_IO = 3,
    GUIRL_ERR_CONFIG = 4,
    GUIRL_ERR_USAGE = 5,
    GUIRL_ERR_INTERNAL = 6
} guirl_status;

const char* guirl_version(void);

/* Message describing the most recent failure on the calling thread, or an
 * empty string when the last call succeeded. */
const char* guirl_last_error(void);

void guirl_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

typedef struct guirl_config guirl_config;

/* Built-in defaults. */
guirl_status guirl_config_default(guirl_config** out);
/* Strict JSON load: unknown keys or out-of-range values fail. */
guirl_status guirl_config_load(const char* path, guirl_config** out);
guirl_status guirl_config_to_json(const guirl_config* cfg, char** out_json);
/* Overrides one leaf setting, e.g. ("train.rounds", "50") or
 * ("train.difficulty", "\"composite\""). value_json is a JSON scalar. The
 * full config is re-validated afterwards. */
guirl_status guirl_config_set(guirl_config* cfg, const char* dotted_key, const char* value_json);
void guirl_config_free(guirl_config* cfg);

/* ---- action utilities -------------------------------------------------- */

/* Parses a canonical action string and returns its canonical serialization.
 * Fails with GUIRL_ERR_PARSE on malformed input (message carries the byte
 * offset). */
guirl_status guirl_action_roundtrip(const char* text, char** out_canonical);

/* Full action-vs-action reward under the config's reward section.
 * judge_backend: "none", "mock", or "remote". out_json gets the breakdown. */
guirl_status guirl_joint_reward(const guirl_config* cfg, const char* pred_action,
                                const char* gt_action, const char* judge_backend,
                                double* out_total, char** out_json);

/* ---- workflows ---------------------------------------------------------- */

/* Scores predictions (JSONL of {step_id, action}) against annotations (JSON
 * array). format: "table", "csv" or "json". */
guirl_status guirl_score_static(const char* annotations_path, const char* predictions_path,
                                const char* judge_backend, int macro_average, const char* format,
                                char** out_text);

/* Per-step rewards for two parallel trajectory JSONL files. */
guirl_status guirl_reward_files(const guirl_config* cfg, const char* trajectories_path,
                                const char* gt_path, const char* judge_backend, char** out_json);

/* Deterministic synthetic tasks as JSONL. */
guirl_status guirl_gen_tasks(const guirl_config* cfg, int n, const char* difficulty,
                             uint64_t seed, char** out_jsonl);

/* Calibrates labeled trajectories and writes extraction records (JSONL) to
 * records_out; out_json gets a count summary. */
guirl_status guirl_csrs_extract(const guirl_config* cfg, const char* trajectories_path,
                                const char* records_out, char** out_json);

/* Closed-loop toy training run. Writes the diagnostics CSV configured in the
 * train section (truncating any previous file) and returns a JSON summary.
 * quiet != 0 suppresses progress lines on stdout. */
guirl_status guirl_train_toy(const guirl_config* cfg, uint64_t seed, int jobs, int quiet,
                             char** out_json);

/* Summary statistics over a diagnostics CSV. */
guirl_status guirl_diagnose(const char* csv_path, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* GUIRL_H */
