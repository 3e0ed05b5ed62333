#include "guirl.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <new>
#include <string>

#include "guirl/config.hpp"
#include "guirl/workflows.hpp"
#include "json.hpp"

struct guirl_config {
    guirl::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

guirl_status status_for(guirl::ErrKind kind) {
    using guirl::ErrKind;
    switch (kind) {
        case ErrKind::parse:
            return GUIRL_ERR_PARSE;
        case ErrKind::io:
            return GUIRL_ERR_IO;
        case ErrKind::config:
            return GUIRL_ERR_CONFIG;
        case ErrKind::usage:
            return GUIRL_ERR_USAGE;
        case ErrKind::internal:
            return GUIRL_ERR_INTERNAL;
        default:
            return GUIRL_ERR_DOMAIN;
    }
}

template <typename Fn>
guirl_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return GUIRL_OK;
    } catch (const guirl::Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return GUIRL_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return GUIRL_ERR_INTERNAL;
    }
}

guirl_status require(bool ok, const char* message) {
    if (ok) {
        return GUIRL_OK;
    }
    g_last_error = message;
    return GUIRL_ERR_USAGE;
}

}  // namespace

extern "C" {

const char* guirl_version(void) { return "0.1.0"; }

const char* guirl_last_error(void) { return g_last_error.c_str(); }

void guirl_string_free(char* s) { std::free(s); }

guirl_status guirl_config_default(guirl_config** out) {
    if (guirl_status st = require(out != nullptr, "out must be non-null"); st != GUIRL_OK) {
        return st;
    }
    return guarded([&] { *out = new guirl_config{guirl::RunConfig{}}; });
}

guirl_status guirl_config_load(const char* path, guirl_config** out) {
    if (guirl_status st = require(path != nullptr && out != nullptr, "path and out must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] { *out = new guirl_config{guirl::load_config(path)}; });
}

guirl_status guirl_config_to_json(const guirl_config* cfg, char** out_json) {
    if (guirl_status st = require(cfg != nullptr && out_json != nullptr, "cfg and out_json must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] { *out_json = dup_string(guirl::config_to_json(cfg->cfg)); });
}

guirl_status guirl_config_set(guirl_config* cfg, const char* dotted_key, const char* value_json) {
    if (guirl_status st = require(cfg != nullptr && dotted_key != nullptr && value_json != nullptr,
                                  "cfg, dotted_key and value_json must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        std::string key(dotted_key);
        std::size_t dot = key.find('.');
        nlohmann::json j = nlohmann::json::parse(guirl::config_to_json(cfg->cfg));
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(value_json);
        } catch (const nlohmann::json::exception& e) {
            guirl::raise(guirl::ErrKind::usage, "capi",
                         std::string("value is not valid json: ") + e.what());
        }
        if (dot == std::string::npos) {
            j[key] = value;
        } else {
            j[key.substr(0, dot)][key.substr(dot + 1)] = value;
        }
        // round-trip through the strict loader so unknown keys and bad
        // ranges are rejected exactly as they would be from a file
        cfg->cfg = guirl::config_from_json(j.dump(), "override");
    });
}

void guirl_config_free(guirl_config* cfg) { delete cfg; }

guirl_status guirl_action_roundtrip(const char* text, char** out_canonical) {
    if (guirl_status st = require(text != nullptr && out_canonical != nullptr,
                                  "text and out_canonical must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        guirl::Action a = guirl::parse_action(text);
        *out_canonical = dup_string(guirl::serialize_action(a));
    });
}

guirl_status guirl_joint_reward(const guirl_config* cfg, const char* pred_action,
                                const char* gt_action, const char* judge_backend,
                                double* out_total, char** out_json) {
    if (guirl_status st = require(cfg != nullptr && pred_action != nullptr && gt_action != nullptr &&
                                      out_total != nullptr,
                                  "cfg, actions and out_total must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        guirl::Action pred = guirl::parse_action(pred_action);
        guirl::Action gt = guirl::parse_action(gt_action);
        std::unique_ptr<guirl::Judge> judge;
        if (judge_backend != nullptr && *judge_backend != '\0' &&
            std::string(judge_backend) != "none") {
            judge = guirl::make_judge(judge_backend);
        }
        guirl::RewardBreakdown b =
            guirl::joint_reward(pred, gt, cfg->cfg.reward, judge.get());
        *out_total = b.total;
        if (out_json != nullptr) {
            nlohmann::json j;
            j["type"] = b.type_score;
            j["value"] = b.value_score;
            if (b.judge_score) {
                j["judge"] = *b.judge_score;
            }
            j["total"] = b.total;
            *out_json = dup_string(j.dump(2));
        }
    });
}

guirl_status guirl_score_static(const char* annotations_path, const char* predictions_path,
                                const char* judge_backend, int macro_average, const char* format,
                                char** out_text) {
    if (guirl_status st = require(annotations_path != nullptr && predictions_path != nullptr &&
                                      out_text != nullptr,
                                  "paths and out_text must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        *out_text = dup_string(guirl::score_static_workflow(
            annotations_path, predictions_path,
            judge_backend == nullptr ? std::string("none") : std::string(judge_backend),
            macro_average != 0, format == nullptr ? std::string("table") : std::string(format)));
    });
}

guirl_status guirl_reward_files(const guirl_config* cfg, const char* trajectories_path,
                                const char* gt_path, const char* judge_backend,
                                char** out_json) {
    if (guirl_status st = require(cfg != nullptr && trajectories_path != nullptr &&
                                      gt_path != nullptr && out_json != nullptr,
                                  "cfg, paths and out_json must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        *out_json = dup_string(guirl::reward_workflow(
            trajectories_path, gt_path, cfg->cfg.reward,
            judge_backend == nullptr ? std::string("none") : std::string(judge_backend)));
    });
}

guirl_status guirl_gen_tasks(const guirl_config* cfg, int n, const char* difficulty,
                             uint64_t seed, char** out_jsonl) {
    if (guirl_status st = require(cfg != nullptr && difficulty != nullptr && out_jsonl != nullptr,
                                  "cfg, difficulty and out_jsonl must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        *out_jsonl = dup_string(guirl::gen_tasks_workflow(cfg->cfg, n, difficulty, seed));
    });
}

guirl_status guirl_csrs_extract(const guirl_config* cfg, const char* trajectories_path,
                                const char* records_out, char** out_json) {
    if (guirl_status st = require(cfg != nullptr && trajectories_path != nullptr &&
                                      records_out != nullptr && out_json != nullptr,
                                  "cfg, paths and out_json must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        *out_json = dup_string(
            guirl::csrs_extract_workflow(cfg->cfg, trajectories_path, records_out));
    });
}

guirl_status guirl_train_toy(const guirl_config* cfg, uint64_t seed, int jobs, int quiet,
                             char** out_json) {
    if (guirl_status st = require(cfg != nullptr && out_json != nullptr,
                                  "cfg and out_json must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] {
        std::ostream* log = quiet != 0 ? nullptr : &std::cout;
        *out_json = dup_string(guirl::train_toy_workflow(cfg->cfg, seed, jobs, log));
    });
}

guirl_status guirl_diagnose(const char* csv_path, char** out_json) {
    if (guirl_status st = require(csv_path != nullptr && out_json != nullptr,
                                  "csv_path and out_json must be non-null");
        st != GUIRL_OK) {
        return st;
    }
    return guarded([&] { *out_json = dup_string(guirl::diagnose_workflow(csv_path)); });
}

}  // extern "C"
