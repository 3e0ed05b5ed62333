#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "guirl.h"

namespace {

struct ConfigHandle {
    guirl_config* ptr = nullptr;
    ~ConfigHandle() { guirl_config_free(ptr); }
};

struct StringOut {
    char* ptr = nullptr;
    ~StringOut() { guirl_string_free(ptr); }
};

int fail(guirl_status status) {
    std::fprintf(stderr, "error: %s\n", guirl_last_error());
    return status == GUIRL_ERR_USAGE ? 2 : 1;
}

int load_config_arg(const std::string& path, ConfigHandle& cfg) {
    guirl_status st = path.empty() ? guirl_config_default(&cfg.ptr)
                                   : guirl_config_load(path.c_str(), &cfg.ptr);
    return st == GUIRL_OK ? 0 : fail(st);
}

int apply_override(ConfigHandle& cfg, const std::string& key, const std::string& value_json) {
    guirl_status st = guirl_config_set(cfg.ptr, key.c_str(), value_json.c_str());
    return st == GUIRL_OK ? 0 : fail(st);
}

std::string quote(const std::string& raw) {
    std::string out = "\"";
    for (char c : raw) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GUI-agent RL toolkit: rewards, GRPO toy training, data routing, "
                 "static benchmark scoring"};
    app.require_subcommand(1);

    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) {
        jobs = 1;
    }
    std::uint64_t seed = 1;
    bool quiet = false;
    app.add_option("--jobs", jobs, "worker threads for rollout collection")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "master seed for all randomness");
    app.add_flag("--quiet", quiet, "suppress progress output");

    // score-static
    auto* score = app.add_subcommand("score-static", "score single-step predictions against "
                                                     "benchmark annotations");
    std::string annotations, predictions;
    std::string judge_backend = "mock";
    std::string format = "table";
    bool macro_average = false;
    score->add_option("--annotations", annotations, "annotation JSON file")->required();
    score->add_option("--predictions", predictions, "prediction JSONL file")->required();
    score->add_option("--judge", judge_backend, "judge backend: none|mock|remote");
    score->add_option("--format", format, "output format: table|csv|json");
    score->add_flag("--macro", macro_average, "macro-average the AVG column");

    // reward
    auto* reward = app.add_subcommand("reward", "per-step rewards for paired trajectory files");
    std::string traj_path, gt_path, reward_config;
    std::string reward_judge = "none";
    reward->add_option("--trajectories", traj_path, "predicted trajectories JSONL")->required();
    reward->add_option("--gt", gt_path, "ground-truth trajectories JSONL")->required();
    reward->add_option("--config", reward_config, "run config JSON");
    reward->add_option("--judge", reward_judge, "judge backend: none|mock|remote");

    // train-toy
    auto* train = app.add_subcommand("train-toy", "closed-loop training on synthetic tasks");
    std::string train_config;
    int rounds = -1;
    std::string train_difficulty;
    std::string diagnostics_out;
    bool no_hindsight = false;
    train->add_option("--config", train_config, "run config JSON");
    train->add_option("--rounds", rounds, "override train.rounds");
    train->add_option("--difficulty", train_difficulty, "override train.difficulty");
    train->add_option("--diagnostics", diagnostics_out, "override train.diagnostics_path");
    train->add_flag("--no-hindsight", no_hindsight, "disable hinted re-rollouts");

    // csrs-extract
    auto* extract = app.add_subcommand("csrs-extract", "calibrate labeled trajectories and "
                                                       "emit extraction records");
    std::string extract_traj, extract_config;
    std::string records_out = "records.jsonl";
    extract->add_option("--trajectories", extract_traj, "labeled trajectories JSONL")->required();
    extract->add_option("--out", records_out, "output records JSONL");
    extract->add_option("--config", extract_config, "run config JSON");

    // gen-tasks
    auto* gen = app.add_subcommand("gen-tasks", "emit deterministic synthetic tasks as JSONL");
    int gen_n = 1;
    std::string gen_difficulty = "atomic";
    std::string gen_config;
    gen->add_option("--n", gen_n, "number of tasks")->required();
    gen->add_option("--difficulty", gen_difficulty, "atomic|composite|conditional");
    gen->add_option("--config", gen_config, "run config JSON");

    // diagnose
    auto* diagnose = app.add_subcommand("diagnose", "summary statistics for a diagnostics CSV");
    std::string diag_csv;
    diagnose->add_option("--csv", diag_csv, "diagnostics CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (score->parsed()) {
        StringOut out;
        guirl_status st = guirl_score_static(annotations.c_str(), predictions.c_str(),
                                             judge_backend.c_str(), macro_average ? 1 : 0,
                                             format.c_str(), &out.ptr);
        if (st != GUIRL_OK) {
            return fail(st);
        }
        std::fputs(out.ptr, stdout);
        return 0;
    }

    if (reward->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config_arg(reward_config, cfg); rc != 0) {
            return rc;
        }
        StringOut out;
        guirl_status st = guirl_reward_files(cfg.ptr, traj_path.c_str(), gt_path.c_str(),
                                             reward_judge.c_str(), &out.ptr);
        if (st != GUIRL_OK) {
            return fail(st);
        }
        std::fputs(out.ptr, stdout);
        std::fputc('\n', stdout);
        return 0;
    }

    if (train->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config_arg(train_config, cfg); rc != 0) {
            return rc;
        }
        if (rounds >= 0) {
            if (int rc = apply_override(cfg, "train.rounds", std::to_string(rounds)); rc != 0) {
                return rc;
            }
        }
        if (!train_difficulty.empty()) {
            if (int rc = apply_override(cfg, "train.difficulty", quote(train_difficulty));
                rc != 0) {
                return rc;
            }
        }
        if (!diagnostics_out.empty()) {
            if (int rc = apply_override(cfg, "train.diagnostics_path", quote(diagnostics_out));
                rc != 0) {
                return rc;
            }
        }
        if (no_hindsight) {
            if (int rc = apply_override(cfg, "train.hindsight", "false"); rc != 0) {
                return rc;
            }
        }
        StringOut out;
        guirl_status st = guirl_train_toy(cfg.ptr, seed, jobs, quiet ? 1 : 0, &out.ptr);
        if (st != GUIRL_OK) {
            return fail(st);
        }
        std::fputs(out.ptr, stdout);
        std::fputc('\n', stdout);
        return 0;
    }

    if (extract->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config_arg(extract_config, cfg); rc != 0) {
            return rc;
        }
        StringOut out;
        guirl_status st = guirl_csrs_extract(cfg.ptr, extract_traj.c_str(), records_out.c_str(),
                                             &out.ptr);
        if (st != GUIRL_OK) {
            return fail(st);
        }
        std::fputs(out.ptr, stdout);
        std::fputc('\n', stdout);
        return 0;
    }

    if (gen->parsed()) {
        ConfigHandle cfg;
        if (int rc = load_config_arg(gen_config, cfg); rc != 0) {
            return rc;
        }
        StringOut out;
        guirl_status st =
            guirl_gen_tasks(cfg.ptr, gen_n, gen_difficulty.c_str(), seed, &out.ptr);
        if (st != GUIRL_OK) {
            return fail(st);
        }
        std::fputs(out.ptr, stdout);
        return 0;
    }

    if (diagnose->parsed()) {
        StringOut out;
        guirl_status st = guirl_diagnose(diag_csv.c_str(), &out.ptr);
        if (st != GUIRL_OK) {
            return fail(st);
        }
        std::fputs(out.ptr, stdout);
        std::fputc('\n', stdout);
        return 0;
    }

    std::fprintf(stderr, "error: no subcommand\n");
    return 2;
}
