#include "guirl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "guirl/env.hpp"
#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "config";

void check_keys(const nlohmann::json& j, const std::string& section,
                const std::set<std::string>& allowed) {
    if (!j.is_object()) {
        raise(ErrKind::config, kOrigin, "section '" + section + "' must be an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (allowed.find(it.key()) == allowed.end()) {
            raise(ErrKind::config, kOrigin,
                  "unknown key '" + it.key() + "' in section '" + section + "'");
        }
    }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& into) {
    if (!j.contains(key)) {
        return;
    }
    try {
        into = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::config, kOrigin, std::string("bad value for '") + key + "': " + e.what());
    }
}

void require_unit_interval(double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        raise(ErrKind::config, kOrigin, std::string(name) + " must lie in [0, 1]");
    }
}

}  // namespace

void CsrsConfig::validate() const {
    require_unit_interval(low_threshold, "csrs.low_threshold");
    require_unit_interval(high_threshold, "csrs.high_threshold");
    if (low_threshold > high_threshold) {
        raise(ErrKind::config, kOrigin, "csrs.low_threshold must not exceed high_threshold");
    }
    if (extractor != "template" && extractor != "remote") {
        raise(ErrKind::config, kOrigin, "csrs.extractor must be 'template' or 'remote'");
    }
    if (rollouts_per_task < 1) {
        raise(ErrKind::config, kOrigin, "csrs.rollouts_per_task must be >= 1");
    }
}

void EnvConfig::validate() const {
    if (step_cap < 1) {
        raise(ErrKind::config, kOrigin, "env.step_cap must be >= 1");
    }
}

void TrainConfig::validate() const {
    if (rounds < 1) {
        raise(ErrKind::config, kOrigin, "train.rounds must be >= 1");
    }
    if (tasks_per_round < 1) {
        raise(ErrKind::config, kOrigin, "train.tasks_per_round must be >= 1");
    }
    if (holdout_tasks < 1) {
        raise(ErrKind::config, kOrigin, "train.holdout_tasks must be >= 1");
    }
    require_unit_interval(hint_adherence, "train.hint_adherence");
    if (!difficulty_from(difficulty)) {
        raise(ErrKind::config, kOrigin, "train.difficulty must be atomic|composite|conditional");
    }
    if (diagnostics_path.empty()) {
        raise(ErrKind::config, kOrigin, "train.diagnostics_path must be non-empty");
    }
}

void RunConfig::validate() const {
    try {
        reward.validate();
        grpo.validate();
    } catch (const Error& e) {
        // Re-badge nested validation failures so callers see one origin for
        // config problems regardless of which section tripped.
        raise(ErrKind::config, kOrigin, e.what());
    }
    csrs.validate();
    env.validate();
    train.validate();
    if (seeds.empty()) {
        raise(ErrKind::config, kOrigin, "seeds must hold at least one entry");
    }
}

RunConfig config_from_json(const std::string& text, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, origin, std::string("invalid json: ") + e.what());
    }
    check_keys(j, "(root)", {"reward", "grpo", "csrs", "env", "train", "seeds"});
    RunConfig cfg;
    if (j.contains("reward")) {
        const nlohmann::json& s = j["reward"];
        check_keys(s, "reward",
                   {"tau_x", "tau_y", "tau_w", "tau_h", "lambda_dim", "alpha_fuse",
                    "judge_weight"});
        read_field(s, "tau_x", cfg.reward.tol.tau_x);
        read_field(s, "tau_y", cfg.reward.tol.tau_y);
        read_field(s, "tau_w", cfg.reward.tol.tau_w);
        read_field(s, "tau_h", cfg.reward.tol.tau_h);
        read_field(s, "lambda_dim", cfg.reward.lambda_dim);
        read_field(s, "alpha_fuse", cfg.reward.alpha_fuse);
        read_field(s, "judge_weight", cfg.reward.judge_weight);
    }
    if (j.contains("grpo")) {
        const nlohmann::json& s = j["grpo"];
        check_keys(s, "grpo",
                   {"group_size", "eps_low", "eps_high", "beta_kl", "beta1", "beta2",
                    "inner_epochs", "learning_rate", "advantage_eps"});
        read_field(s, "group_size", cfg.grpo.group_size);
        read_field(s, "eps_low", cfg.grpo.eps_low);
        read_field(s, "eps_high", cfg.grpo.eps_high);
        read_field(s, "beta_kl", cfg.grpo.beta_kl);
        read_field(s, "beta1", cfg.grpo.beta1);
        read_field(s, "beta2", cfg.grpo.beta2);
        read_field(s, "inner_epochs", cfg.grpo.inner_epochs);
        read_field(s, "learning_rate", cfg.grpo.learning_rate);
        read_field(s, "advantage_eps", cfg.grpo.advantage_eps);
    }
    if (j.contains("csrs")) {
        const nlohmann::json& s = j["csrs"];
        check_keys(s, "csrs",
                   {"low_threshold", "high_threshold", "extractor", "rollouts_per_task"});
        read_field(s, "low_threshold", cfg.csrs.low_threshold);
        read_field(s, "high_threshold", cfg.csrs.high_threshold);
        read_field(s, "extractor", cfg.csrs.extractor);
        read_field(s, "rollouts_per_task", cfg.csrs.rollouts_per_task);
    }
    if (j.contains("env")) {
        const nlohmann::json& s = j["env"];
        check_keys(s, "env", {"fixture_path", "step_cap"});
        read_field(s, "fixture_path", cfg.env.fixture_path);
        read_field(s, "step_cap", cfg.env.step_cap);
    }
    if (j.contains("train")) {
        const nlohmann::json& s = j["train"];
        check_keys(s, "train",
                   {"rounds", "tasks_per_round", "holdout_tasks", "hint_adherence", "hindsight",
                    "difficulty", "diagnostics_path"});
        read_field(s, "rounds", cfg.train.rounds);
        read_field(s, "tasks_per_round", cfg.train.tasks_per_round);
        read_field(s, "holdout_tasks", cfg.train.holdout_tasks);
        read_field(s, "hint_adherence", cfg.train.hint_adherence);
        read_field(s, "hindsight", cfg.train.hindsight);
        read_field(s, "difficulty", cfg.train.difficulty);
        read_field(s, "diagnostics_path", cfg.train.diagnostics_path);
    }
    if (j.contains("seeds")) {
        try {
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        } catch (const nlohmann::json::exception& e) {
            raise(ErrKind::config, kOrigin,
                  std::string("seeds must be a list of integers: ") + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

std::string config_to_json(const RunConfig& config) {
    nlohmann::json j;
    j["reward"] = {{"tau_x", config.reward.tol.tau_x},
                   {"tau_y", config.reward.tol.tau_y},
                   {"tau_w", config.reward.tol.tau_w},
                   {"tau_h", config.reward.tol.tau_h},
                   {"lambda_dim", config.reward.lambda_dim},
                   {"alpha_fuse", config.reward.alpha_fuse},
                   {"judge_weight", config.reward.judge_weight}};
    j["grpo"] = {{"group_size", config.grpo.group_size},
                 {"eps_low", config.grpo.eps_low},
                 {"eps_high", config.grpo.eps_high},
                 {"beta_kl", config.grpo.beta_kl},
                 {"beta1", config.grpo.beta1},
                 {"beta2", config.grpo.beta2},
                 {"inner_epochs", config.grpo.inner_epochs},
                 {"learning_rate", config.grpo.learning_rate},
                 {"advantage_eps", config.grpo.advantage_eps}};
    j["csrs"] = {{"low_threshold", config.csrs.low_threshold},
                 {"high_threshold", config.csrs.high_threshold},
                 {"extractor", config.csrs.extractor},
                 {"rollouts_per_task", config.csrs.rollouts_per_task}};
    j["env"] = {{"fixture_path", config.env.fixture_path},
                {"step_cap", config.env.step_cap}};
    j["train"] = {{"rounds", config.train.rounds},
                  {"tasks_per_round", config.train.tasks_per_round},
                  {"holdout_tasks", config.train.holdout_tasks},
                  {"hint_adherence", config.train.hint_adherence},
                  {"hindsight", config.train.hindsight},
                  {"difficulty", config.train.difficulty},
                  {"diagnostics_path", config.train.diagnostics_path}};
    j["seeds"] = config.seeds;
    return j.dump(2);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return config_from_json(buf.str(), path);
}

void save_config(const std::string& path, const RunConfig& config) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    out << config_to_json(config) << "\n";
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path + "'");
    }
}

}  // namespace guirl
