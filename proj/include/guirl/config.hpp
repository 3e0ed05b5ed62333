#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "guirl/grpo.hpp"
#include "guirl/reward.hpp"

namespace guirl {

struct CsrsConfig {
    double low_threshold = 0.3;
    double high_threshold = 0.8;
    std::string extractor = "template";  // template | remote
    int rollouts_per_task = 8;           // pass-rate sample size

    void validate() const;
};

struct EnvConfig {
    std::string fixture_path;  // empty selects the builtin app graph
    int step_cap = 20;

    void validate() const;
};

struct TrainConfig {
    int rounds = 200;
    int tasks_per_round = 4;
    int holdout_tasks = 50;
    double hint_adherence = 0.9;
    bool hindsight = true;
    std::string difficulty = "atomic";
    std::string diagnostics_path = "diagnostics.csv";

    void validate() const;
};

/// Whole-run settings. Loading is strict: unknown keys anywhere in the file
/// and out-of-range values are rejected before any work starts.
struct RunConfig {
    RewardConfig reward;
    GrpoConfig grpo;
    CsrsConfig csrs;
    EnvConfig env;
    TrainConfig train;
    std::vector<std::uint64_t> seeds{1};

    void validate() const;
};

RunConfig config_from_json(const std::string& text, const std::string& origin);
std::string config_to_json(const RunConfig& config);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& config);

}  // namespace guirl
