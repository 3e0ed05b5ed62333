#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "guirl/config.hpp"
#include "guirl/csrs.hpp"
#include "guirl/diag.hpp"
#include "guirl/grpo.hpp"

namespace guirl {

/// Builds the simulator from the config: the builtin app graph unless a
/// fixture path is set.
SimEnv make_env(const EnvConfig& cfg);

struct RoundLog {
    int round = 0;             // 1-based
    double mean_reward = 0.0;  // mean over groups of the group mean, post-hindsight
    int hindsight_fired = 0;   // all-failed groups re-rolled with hints
    int hindsight_raised = 0;  // of those, re-rolls that raised the group mean
    std::size_t accepted = 0;  // refinement partition sizes for this round
    std::size_t rejected = 0;
    std::size_t records = 0;   // extraction records routed this round
    DiagRecord diag;
};

struct TrainResult {
    double initial_success = 0.0;  // greedy holdout success before training
    double final_success = 0.0;    // and after
    double mean_entropy = 0.0;     // mean of the per-round entropy column
    int hindsight_fired = 0;
    int hindsight_raised = 0;
    std::vector<RoundLog> rounds;
    ToyPolicy policy{};

    std::string to_json() const;  // summary without the policy table
};

/// Deterministic greedy evaluation: fraction of tasks the argmax policy
/// completes successfully.
double evaluate_policy(const ToyPolicy& policy, const SimEnv& env,
                       const std::vector<TaskSpec>& tasks);

/// Fixed evaluation suite drawn from a seed stream reserved for holdouts.
std::vector<TaskSpec> holdout_suite(const SimEnv& env, Difficulty difficulty, int n,
                                    std::uint64_t seed);

/// The closed loop: each round generates fresh tasks, collects one rollout
/// group per task (optionally in parallel worker threads), gives all-failed
/// groups a hinted second pass, runs the calibrate/extract/partition/route
/// pipeline on the round's trajectories, applies one GRPO update, and appends
/// one diagnostics row to the sink. Deterministic for a fixed seed and
/// config, independent of the worker count.
TrainResult train_toy(const RunConfig& cfg, std::uint64_t seed, DiagCsvSink* sink, int jobs = 1,
                      std::ostream* log = nullptr);

/// File-level entry points backing the command-line subcommands. Each returns
/// the text to print.
std::string score_static_workflow(const std::string& annotations_path,
                                  const std::string& predictions_path,
                                  const std::string& judge_backend, bool macro_average,
                                  const std::string& format);
std::string reward_workflow(const std::string& trajectories_path, const std::string& gt_path,
                            const RewardConfig& cfg, const std::string& judge_backend);
std::string gen_tasks_workflow(const RunConfig& cfg, int n, const std::string& difficulty,
                               std::uint64_t seed);
std::string csrs_extract_workflow(const RunConfig& cfg, const std::string& trajectories_path,
                                  const std::string& records_out);
std::string train_toy_workflow(const RunConfig& cfg, std::uint64_t seed, int jobs,
                               std::ostream* log);
std::string diagnose_workflow(const std::string& csv_path);

}  // namespace guirl
