#include "guirl/csrs.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "csrs";

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string trajectory_id_of(const Trajectory& trajectory) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "traj-%016llx",
                  static_cast<unsigned long long>(fnv1a(trajectory_to_json_line(trajectory))));
    return buf;
}

std::string join_history(const Trajectory& trajectory, std::size_t upto) {
    std::string out;
    for (std::size_t i = 0; i < upto && i < trajectory.steps.size(); ++i) {
        if (!out.empty()) out += " ; ";
        out += serialize_action(trajectory.steps[i].action);
    }
    return out.empty() ? "(none)" : out;
}

}  // namespace

std::string_view to_string(ExtractionCategory category) {
    switch (category) {
        case ExtractionCategory::progress_tracking: return "progress_tracking";
        case ExtractionCategory::state_summary: return "state_summary";
        case ExtractionCategory::effect_prediction: return "effect_prediction";
        case ExtractionCategory::self_reflection: return "self_reflection";
        case ExtractionCategory::state_verification: return "state_verification";
        case ExtractionCategory::intent_execution: return "intent_execution";
        case ExtractionCategory::action_prediction: return "action_prediction";
    }
    return "progress_tracking";
}

std::optional<ExtractionCategory> extraction_category_from(int value) {
    if (value < 1 || value > kExtractionCategoryCount) {
        return std::nullopt;
    }
    return static_cast<ExtractionCategory>(value);
}

std::string record_to_json_line(const ExtractionRecord& record) {
    nlohmann::json j;
    j["category"] = static_cast<int>(record.category);
    j["trajectory_id"] = record.trajectory_id;
    if (record.step_index) {
        j["step_index"] = *record.step_index;
    }
    j["prompt"] = record.prompt;
    j["target"] = record.target;
    return j.dump();
}

ExtractionRecord record_from_json_line(const std::string& line, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, origin, std::string("invalid json: ") + e.what());
    }
    ExtractionRecord r;
    try {
        std::optional<ExtractionCategory> c = extraction_category_from(j.at("category").get<int>());
        if (!c) {
            raise(ErrKind::schema, origin, "category out of range");
        }
        r.category = *c;
        r.trajectory_id = j.at("trajectory_id").get<std::string>();
        if (j.contains("step_index")) {
            r.step_index = j.at("step_index").get<std::size_t>();
        }
        r.prompt = j.at("prompt").get<std::string>();
        r.target = j.at("target").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::schema, origin, std::string("bad record field: ") + e.what());
    }
    return r;
}

void write_records(const std::string& path, const std::vector<ExtractionRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    for (const ExtractionRecord& r : records) {
        out << record_to_json_line(r) << "\n";
    }
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path + "'");
    }
}

std::vector<ExtractionRecord> read_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    std::vector<ExtractionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::ostringstream origin;
        origin << path << ":" << line_no;
        out.push_back(record_from_json_line(line, origin.str()));
    }
    return out;
}

Outcome SimVerifier::judge(const Trajectory& trajectory) {
    std::vector<Action> actions;
    actions.reserve(trajectory.steps.size());
    for (const Step& s : trajectory.steps) {
        actions.push_back(s.action);
    }
    EnvState final_state = env_->replay(task_, actions);
    return env_->verify_outcome(final_state, task_);
}

Outcome RecordedOutcomeVerifier::judge(const Trajectory& trajectory) {
    if (trajectory.outcome == Outcome::unlabeled) {
        raise(ErrKind::verifier, kOrigin, "trajectory carries no recorded outcome");
    }
    return trajectory.outcome;
}

TrajectoryLabel calibrate(const Trajectory& trajectory, VerifierInterface& verifier) {
    trajectory.validate(kOrigin);
    TrajectoryLabel label;
    label.verdict = verifier.judge(trajectory);
    if (label.verdict == Outcome::unlabeled) {
        raise(ErrKind::verifier, kOrigin, "verifier returned no verdict");
    }
    label.source = verifier.source();
    return label;
}

std::vector<ExtractionRecord> TemplateExtractor::extract(const Trajectory& trajectory,
                                                         const TrajectoryLabel& label) {
    std::string tid = trajectory_id_of(trajectory);
    std::size_t n = trajectory.steps.size();
    bool success = label.verdict == Outcome::success;
    std::vector<ExtractionRecord> out;

    for (std::size_t i = 0; i < n; ++i) {
        const Step& step = trajectory.steps[i];
        std::string action = serialize_action(step.action);
        std::string prefix = "Task: " + trajectory.task + "\nObservation: " +
                             step.observation_id + "\nHistory: " + join_history(trajectory, i);

        out.push_back({ExtractionCategory::progress_tracking, tid, i,
                       prefix + "\nHow far along is the task?",
                       std::to_string(i) + " of " + std::to_string(n) +
                           " steps executed; the current step is " + action});
        out.push_back({ExtractionCategory::state_summary, tid, i,
                       prefix + "\nSummarize the interface state.",
                       "state " + step.observation_id + " reached after " + std::to_string(i) +
                           " steps"});
        out.push_back({ExtractionCategory::effect_prediction, tid, i,
                       prefix + "\nThe agent performs " + action +
                           ". Predict the next observation.",
                       i + 1 < n ? trajectory.steps[i + 1].observation_id
                                 : std::string("episode terminal")});
        out.push_back({ExtractionCategory::intent_execution, tid, i,
                       prefix + "\nWhat does executing " + action + " accomplish?",
                       "executing " + action + " advances the task toward its goal"});
        if (success) {
            out.push_back({ExtractionCategory::action_prediction, tid, i,
                           prefix + "\nChoose the next action.", action});
        }
    }

    std::string outcome_name(to_string(label.verdict));
    out.push_back({ExtractionCategory::self_reflection, tid, std::nullopt,
                   "Task: " + trajectory.task + "\nThe episode ended with outcome " +
                       outcome_name + " after " + std::to_string(n) +
                       " steps. Reflect on the attempt.",
                   success ? "the plan satisfied the goal; keep these decisions"
                           : "the attempt failed; the chosen actions did not satisfy the goal"});
    out.push_back({ExtractionCategory::state_verification, tid, std::nullopt,
                   "Task: " + trajectory.task +
                       "\nDoes the final state satisfy the task goal?",
                   success ? "yes" : "no"});
    return out;
}

struct RemoteExtractor::Impl {
    RemoteJudgeOptions options;
    std::string host;
    std::string path;

    explicit Impl(RemoteJudgeOptions opts) : options(std::move(opts)) {
        if (options.endpoint.empty()) {
            raise(ErrKind::config, kOrigin, "remote extractor endpoint is empty");
        }
        std::size_t scheme = options.endpoint.find("://");
        std::size_t path_at =
            options.endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (path_at == std::string::npos) {
            host = options.endpoint;
            path = "/";
        } else {
            host = options.endpoint.substr(0, path_at);
            path = options.endpoint.substr(path_at);
        }
    }

    nlohmann::json post(const nlohmann::json& body) {
        int attempts = options.max_retries + 1;
        for (int attempt = 0;; ++attempt) {
            try {
                httplib::Client client(host);
                auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
                client.set_connection_timeout(secs.count(), 0);
                client.set_read_timeout(secs.count(), 0);
                httplib::Headers headers;
                if (!options.api_key.empty()) {
                    headers.emplace("Authorization", "Bearer " + options.api_key);
                }
                httplib::Result res = client.Post(path, headers, body.dump(), "application/json");
                if (!res) {
                    raise(ErrKind::judge_unavailable, kOrigin,
                          "transport failure: " + httplib::to_string(res.error()));
                }
                if (res->status >= 500) {
                    raise(ErrKind::judge_unavailable, kOrigin,
                          "server error status " + std::to_string(res->status));
                }
                if (res->status != 200) {
                    raise(ErrKind::judge_malformed, kOrigin,
                          "unexpected status " + std::to_string(res->status));
                }
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::exception& e) {
                    raise(ErrKind::judge_malformed, kOrigin,
                          std::string("bad response json: ") + e.what());
                }
            } catch (const Error& e) {
                if (e.kind() != ErrKind::judge_unavailable || attempt + 1 >= attempts) {
                    throw;
                }
                std::this_thread::sleep_for(options.backoff_base * (attempt + 1));
            }
        }
    }
};

RemoteExtractor::RemoteExtractor(RemoteJudgeOptions options)
    : impl_(new Impl(std::move(options))) {}

RemoteExtractor::~RemoteExtractor() = default;

std::vector<ExtractionRecord> RemoteExtractor::extract(const Trajectory& trajectory,
                                                       const TrajectoryLabel& label) {
    nlohmann::json body;
    body["task"] = trajectory.task;
    body["outcome"] = std::string(to_string(label.verdict));
    body["steps"] = nlohmann::json::array();
    for (const Step& s : trajectory.steps) {
        body["steps"].push_back(
            {{"obs", s.observation_id}, {"action", serialize_action(s.action)}});
    }
    nlohmann::json reply = impl_->post(body);
    if (!reply.is_object() || !reply.contains("records") || !reply["records"].is_array()) {
        raise(ErrKind::judge_malformed, kOrigin, "extractor reply is missing records");
    }
    std::string tid = trajectory_id_of(trajectory);
    std::vector<ExtractionRecord> out;
    for (const auto& jr : reply["records"]) {
        ExtractionRecord r;
        std::optional<ExtractionCategory> c;
        try {
            c = extraction_category_from(jr.at("category").get<int>());
            if (!c) {
                raise(ErrKind::judge_malformed, kOrigin, "extractor category out of range");
            }
            r.category = *c;
            if (jr.contains("step_index")) {
                r.step_index = jr.at("step_index").get<std::size_t>();
            }
            r.prompt = jr.at("prompt").get<std::string>();
            r.target = jr.at("target").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            raise(ErrKind::judge_malformed, kOrigin,
                  std::string("bad extractor record: ") + e.what());
        }
        r.trajectory_id = tid;
        out.push_back(std::move(r));
    }
    return out;
}

std::unique_ptr<ExtractorInterface> make_extractor(const std::string& backend) {
    if (backend == "template") {
        return std::make_unique<TemplateExtractor>();
    }
    if (backend == "remote") {
        RemoteJudgeOptions options;
        const char* endpoint = std::getenv("JUDGE_ENDPOINT");
        if (endpoint == nullptr || *endpoint == '\0') {
            raise(ErrKind::config, kOrigin, "JUDGE_ENDPOINT is not set");
        }
        options.endpoint = endpoint;
        if (const char* key = std::getenv("JUDGE_API_KEY")) {
            options.api_key = key;
        }
        return std::make_unique<RemoteExtractor>(std::move(options));
    }
    raise(ErrKind::config, kOrigin, "unknown extractor backend '" + backend + "'");
}

std::vector<ExtractionRecord> extract(const Trajectory& trajectory, const TrajectoryLabel& label,
                                      ExtractorInterface& generator) {
    if (label.verdict == Outcome::unlabeled) {
        raise(ErrKind::domain, kOrigin, "extraction requires a set label");
    }
    std::vector<ExtractionRecord> records = generator.extract(trajectory, label);
    if (label.verdict == Outcome::failure) {
        records.erase(std::remove_if(records.begin(), records.end(),
                                     [](const ExtractionRecord& r) {
                                         return r.category ==
                                                ExtractionCategory::action_prediction;
                                     }),
                      records.end());
    } else {
        std::set<int> seen;
        for (const ExtractionRecord& r : records) {
            seen.insert(static_cast<int>(r.category));
        }
        if (seen.size() != static_cast<std::size_t>(kExtractionCategoryCount)) {
            raise(ErrKind::generation, kOrigin,
                  "success trajectory must yield all seven categories");
        }
    }
    return records;
}

PassRateLabel pass_rate_label(const TaskSpec& task,
                              const std::function<std::unique_ptr<Actor>()>& make_actor, int n,
                              const SimEnv& env, std::uint64_t seed_base,
                              VerifierInterface* verifier) {
    if (n < 1) {
        raise(ErrKind::domain, kOrigin, "pass_rate_label needs n >= 1");
    }
    PassRateLabel label;
    label.task_id = task.id;
    label.n_rollouts = n;
    for (int i = 0; i < n; ++i) {
        std::unique_ptr<Actor> actor = make_actor();
        Trajectory t = rollout(*actor, env, task, mix_seed(seed_base, 0x70a55ull + i));
        Outcome verdict = verifier != nullptr ? verifier->judge(t) : t.outcome;
        if (verdict == Outcome::success) {
            ++label.n_pass;
        }
    }
    label.rate = static_cast<double>(label.n_pass) / static_cast<double>(n);
    return label;
}

Partition partition_refinement(const std::vector<RefinementSample>& samples, double low,
                               double high) {
    if (!std::isfinite(low) || !std::isfinite(high) || low < 0.0 || high > 1.0 || low > high) {
        raise(ErrKind::threshold, kOrigin, "need 0 <= low <= high <= 1");
    }
    Partition out;
    out.low = low;
    out.high = high;
    for (const RefinementSample& s : samples) {
        if (s.label.rate < 0.0 || s.label.rate > 1.0) {
            raise(ErrKind::domain, kOrigin, "pass rate outside [0, 1]");
        }
        PartitionedSample p{s, false, false};
        if (s.label.rate >= high) {
            out.accepted.push_back(p);
        } else {
            p.excluded = s.label.rate == 0.0;
            p.weak = s.label.rate < low;
            out.rejected.push_back(p);
        }
    }
    return out;
}

std::string_view curriculum_for(Difficulty difficulty) {
    switch (difficulty) {
        case Difficulty::atomic: return "simple";
        case Difficulty::composite: return "functional";
        case Difficulty::conditional: return "intent";
    }
    return "simple";
}

namespace {

int curriculum_rank(const std::string& tag) {
    if (tag == "simple") return 0;
    if (tag == "functional") return 1;
    if (tag == "intent") return 2;
    return 3;
}

std::string record_id(const ExtractionRecord& r) {
    std::string id = r.trajectory_id + "#c" + std::to_string(static_cast<int>(r.category));
    if (r.step_index) {
        id += "#s" + std::to_string(*r.step_index);
    }
    return id;
}

}  // namespace

StagePlan route(const Partition& partition, const std::vector<ExtractionRecord>& records) {
    StagePlan plan;
    for (const PartitionedSample& p : partition.accepted) {
        StageEntry e{p.sample.id, "sample", p.excluded, p.sample.curriculum};
        plan.midtrain.push_back(e);
        plan.coldstart.push_back(e);
    }
    for (const PartitionedSample& p : partition.rejected) {
        plan.coldstart.push_back({p.sample.id, "sample", p.excluded, p.sample.curriculum});
    }
    for (const ExtractionRecord& r : records) {
        StageEntry e{record_id(r), "record", false, ""};
        plan.coldstart.push_back(e);
        plan.rlvr.push_back(e);
    }
    std::stable_sort(plan.coldstart.begin(), plan.coldstart.end(),
                     [](const StageEntry& a, const StageEntry& b) {
                         return curriculum_rank(a.curriculum) < curriculum_rank(b.curriculum);
                     });
    return plan;
}

std::string StagePlan::to_json() const {
    auto stage_json = [](const std::vector<StageEntry>& entries) {
        nlohmann::json arr = nlohmann::json::array();
        for (const StageEntry& e : entries) {
            arr.push_back({{"id", e.id},
                           {"kind", e.kind},
                           {"excluded", e.excluded},
                           {"curriculum", e.curriculum}});
        }
        return arr;
    };
    nlohmann::json j;
    j["midtrain"] = stage_json(midtrain);
    j["coldstart"] = stage_json(coldstart);
    j["rlvr"] = stage_json(rlvr);
    return j.dump(2);
}

}  // namespace guirl
