#include "guirl/workflows.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "guirl/bench.hpp"
#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "workflows";

std::uint64_t round_seed(std::uint64_t seed, int round) {
    return mix_seed(seed, 0x726f756e64ull + static_cast<std::uint64_t>(round));
}

/// Runs fn(slot) for every slot, splitting slots across up to `jobs` worker
/// threads. Results must land in preallocated slots so the outcome does not
/// depend on scheduling. The first exception wins and is rethrown.
void parallel_slots(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
    std::mutex mu;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < count; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                }
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

double group_mean_reward(const RolloutGroup& group) {
    if (group.rewards.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (double r : group.rewards) {
        sum += r;
    }
    return sum / static_cast<double>(group.rewards.size());
}

DiagRecord round_diagnostics(int round, const ToyPolicy& policy,
                             const std::vector<RolloutGroup>& groups, const UpdateStats& stats) {
    std::vector<double> lp_rollout;
    std::vector<double> lp_train;
    std::vector<double> deltas;
    std::vector<double> ratios;
    std::vector<std::pair<std::size_t, std::size_t>> bounds;
    std::set<std::pair<std::string, std::uint32_t>> visited;
    for (const RolloutGroup& g : groups) {
        for (const std::vector<PolicyToken>& tokens : g.tokens) {
            std::size_t begin = lp_rollout.size();
            for (const PolicyToken& t : tokens) {
                double train = policy.logp(t.state_key, t.mask, t.hint_role, t.role);
                lp_rollout.push_back(t.logp);
                lp_train.push_back(train);
                deltas.push_back(train - t.logp);
                ratios.push_back(std::exp(train - t.logp));
                visited.insert({t.state_key, t.mask});
            }
            bounds.push_back({begin, lp_rollout.size()});
        }
    }
    DiagRecord rec;
    rec.step = round;
    rec.rollout_log_ppl = rollout_log_ppl(lp_rollout);
    rec.ppl_ratio = ppl_ratio(lp_train, lp_rollout);
    rec.k3_kl = k3_kl(deltas);
    rec.chi2_token = chi2(ratios, Chi2Granularity::token, nullptr, kSeqWeightTrunc);
    rec.chi2_seq = chi2(ratios, Chi2Granularity::sequence, &bounds, kSeqWeightTrunc);
    std::vector<std::pair<std::string, std::uint32_t>> states(visited.begin(), visited.end());
    rec.entropy = policy_entropy(policy, states);
    rec.clip_fraction = stats.epochs.empty() ? 0.0 : stats.epochs.back().clip_fraction;
    return rec;
}

std::unique_ptr<Judge> judge_for(const std::string& backend) {
    if (backend.empty() || backend == "none") {
        return nullptr;
    }
    return make_judge(backend);
}

}  // namespace

SimEnv make_env(const EnvConfig& cfg) {
    cfg.validate();
    AppGraph graph =
        cfg.fixture_path.empty() ? AppGraph::builtin() : AppGraph::load(cfg.fixture_path);
    return SimEnv(std::move(graph), cfg.step_cap);
}

double evaluate_policy(const ToyPolicy& policy, const SimEnv& env,
                       const std::vector<TaskSpec>& tasks) {
    if (tasks.empty()) {
        return 0.0;
    }
    int successes = 0;
    for (const TaskSpec& task : tasks) {
        ArgmaxActor actor(policy, env.graph());
        Trajectory t = rollout(actor, env, task, 0x6576616cull);
        if (t.outcome == Outcome::success) {
            ++successes;
        }
    }
    return static_cast<double>(successes) / static_cast<double>(tasks.size());
}

std::vector<TaskSpec> holdout_suite(const SimEnv& env, Difficulty difficulty, int n,
                                    std::uint64_t seed) {
    std::vector<TaskSpec> tasks;
    tasks.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        tasks.push_back(env.generate_task(mix_seed(seed, 0x686f6c64ull + i), difficulty));
    }
    return tasks;
}

std::string TrainResult::to_json() const {
    nlohmann::json j;
    j["initial_success"] = initial_success;
    j["final_success"] = final_success;
    j["mean_entropy"] = mean_entropy;
    j["hindsight_fired"] = hindsight_fired;
    j["hindsight_raised"] = hindsight_raised;
    j["rounds"] = rounds.size();
    if (!rounds.empty()) {
        j["final_mean_reward"] = rounds.back().mean_reward;
    }
    return j.dump(2);
}

TrainResult train_toy(const RunConfig& cfg, std::uint64_t seed, DiagCsvSink* sink, int jobs,
                      std::ostream* log) {
    cfg.validate();
    SimEnv env = make_env(cfg.env);
    Difficulty difficulty = *difficulty_from(cfg.train.difficulty);
    std::unique_ptr<ExtractorInterface> extractor = make_extractor(cfg.csrs.extractor);

    TrainResult result;
    result.policy = ToyPolicy(cfg.train.hint_adherence);

    std::vector<TaskSpec> holdout =
        holdout_suite(env, difficulty, cfg.train.holdout_tasks, mix_seed(seed, 0x686f6cull));
    result.initial_success = evaluate_policy(result.policy, env, holdout);

    double entropy_sum = 0.0;
    for (int round = 1; round <= cfg.train.rounds; ++round) {
        std::uint64_t rseed = round_seed(seed, round);

        std::vector<TaskSpec> tasks;
        tasks.reserve(static_cast<std::size_t>(cfg.train.tasks_per_round));
        for (int i = 0; i < cfg.train.tasks_per_round; ++i) {
            tasks.push_back(env.generate_task(mix_seed(rseed, 0x7461736bull + i), difficulty));
        }

        std::vector<RolloutGroup> groups(tasks.size());
        parallel_slots(tasks.size(), jobs, [&](std::size_t slot) {
            groups[slot] = collect_group(result.policy, env, tasks[slot], cfg.grpo,
                                         mix_seed(rseed, 0x67727075ull + slot));
        });

        RoundLog rl;
        rl.round = round;
        if (cfg.train.hindsight) {
            for (std::size_t slot = 0; slot < groups.size(); ++slot) {
                bool all_failed = std::all_of(groups[slot].rewards.begin(),
                                              groups[slot].rewards.end(),
                                              [](double r) { return r == 0.0; });
                if (!all_failed) {
                    continue;
                }
                double before = group_mean_reward(groups[slot]);
                RolloutGroup hinted =
                    hindsight_pass(groups[slot], env, result.policy, cfg.grpo,
                                   mix_seed(rseed, 0x68696e74ull + slot));
                ++rl.hindsight_fired;
                if (group_mean_reward(hinted) > before) {
                    ++rl.hindsight_raised;
                }
                groups[slot] = std::move(hinted);
            }
        }

        // refinement leg: the group's own rollouts double as the pass-rate
        // sample for its task
        std::vector<RefinementSample> samples;
        std::vector<ExtractionRecord> round_records;
        for (std::size_t slot = 0; slot < groups.size(); ++slot) {
            const RolloutGroup& g = groups[slot];
            PassRateLabel label;
            label.task_id = g.task_id;
            label.n_rollouts = static_cast<int>(g.rewards.size());
            for (double r : g.rewards) {
                if (r > 0.0) {
                    ++label.n_pass;
                }
            }
            label.rate = label.n_rollouts == 0
                             ? 0.0
                             : static_cast<double>(label.n_pass) / label.n_rollouts;
            samples.push_back({g.task_id, label, std::string(curriculum_for(difficulty))});

            SimVerifier verifier(env, tasks[slot]);
            for (const Trajectory& t : g.trajectories) {
                TrajectoryLabel tl = calibrate(t, verifier);
                std::vector<ExtractionRecord> recs = extract(t, tl, *extractor);
                round_records.insert(round_records.end(),
                                     std::make_move_iterator(recs.begin()),
                                     std::make_move_iterator(recs.end()));
            }
        }
        Partition partition = partition_refinement(samples, cfg.csrs.low_threshold,
                                                   cfg.csrs.high_threshold);
        StagePlan plan = route(partition, round_records);
        rl.accepted = partition.accepted.size();
        rl.rejected = partition.rejected.size();
        rl.records = round_records.size();
        (void)plan;

        UpdateStats stats = grpo_update(result.policy, groups, cfg.grpo);

        double reward_sum = 0.0;
        for (const RolloutGroup& g : groups) {
            reward_sum += group_mean_reward(g);
        }
        rl.mean_reward = groups.empty() ? 0.0 : reward_sum / groups.size();
        rl.diag = round_diagnostics(round, result.policy, groups, stats);
        entropy_sum += rl.diag.entropy;
        result.hindsight_fired += rl.hindsight_fired;
        result.hindsight_raised += rl.hindsight_raised;
        if (sink != nullptr) {
            sink->emit({rl.diag});
        }
        if (log != nullptr && (round % 20 == 0 || round == cfg.train.rounds)) {
            *log << "round " << round << " mean_reward " << rl.mean_reward << " entropy "
                 << rl.diag.entropy << "\n";
        }
        result.rounds.push_back(std::move(rl));
    }

    result.mean_entropy =
        result.rounds.empty() ? 0.0 : entropy_sum / static_cast<double>(result.rounds.size());
    result.final_success = evaluate_policy(result.policy, env, holdout);
    return result;
}

std::string score_static_workflow(const std::string& annotations_path,
                                  const std::string& predictions_path,
                                  const std::string& judge_backend, bool macro_average,
                                  const std::string& format) {
    std::vector<Annotation> anns = load_annotations(annotations_path);
    std::vector<Prediction> preds = load_predictions(predictions_path);
    std::unique_ptr<Judge> judge = judge_for(judge_backend);
    ScoreReport report = score_benchmark(preds, anns, judge.get(), macro_average);
    if (format == "csv") {
        return report.to_csv();
    }
    if (format == "json") {
        return report.to_json();
    }
    if (format == "table" || format.empty()) {
        return report.render_table();
    }
    raise(ErrKind::config, kOrigin, "unknown report format '" + format + "'");
}

std::string reward_workflow(const std::string& trajectories_path, const std::string& gt_path,
                            const RewardConfig& cfg, const std::string& judge_backend) {
    cfg.validate();
    std::vector<Trajectory> preds = read_trajectories(trajectories_path);
    std::vector<Trajectory> gts = read_trajectories(gt_path);
    if (preds.size() != gts.size()) {
        raise(ErrKind::length_mismatch, kOrigin,
              "trajectory counts differ: " + std::to_string(preds.size()) + " vs " +
                  std::to_string(gts.size()));
    }
    std::unique_ptr<Judge> judge = judge_for(judge_backend);
    nlohmann::json pairs = nlohmann::json::array();
    double grand_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const Trajectory& p = preds[i];
        const Trajectory& g = gts[i];
        if (p.steps.size() != g.steps.size()) {
            raise(ErrKind::length_mismatch, kOrigin,
                  "step counts differ in pair " + std::to_string(i) + ": " +
                      std::to_string(p.steps.size()) + " vs " + std::to_string(g.steps.size()));
        }
        nlohmann::json steps = nlohmann::json::array();
        double sum = 0.0;
        for (std::size_t k = 0; k < p.steps.size(); ++k) {
            RewardBreakdown b =
                joint_reward(p.steps[k].action, g.steps[k].action, cfg, judge.get());
            nlohmann::json js;
            js["type"] = b.type_score;
            js["value"] = b.value_score;
            if (b.judge_score) {
                js["judge"] = *b.judge_score;
            }
            js["total"] = b.total;
            steps.push_back(std::move(js));
            sum += b.total;
        }
        double mean = p.steps.empty() ? 0.0 : sum / static_cast<double>(p.steps.size());
        grand_sum += mean;
        pairs.push_back({{"task", g.task}, {"steps", std::move(steps)}, {"mean_total", mean}});
    }
    nlohmann::json j;
    j["pairs"] = std::move(pairs);
    j["mean_total"] = preds.empty() ? 0.0 : grand_sum / static_cast<double>(preds.size());
    return j.dump(2);
}

std::string gen_tasks_workflow(const RunConfig& cfg, int n, const std::string& difficulty,
                               std::uint64_t seed) {
    if (n < 1) {
        raise(ErrKind::usage, kOrigin, "task count must be >= 1");
    }
    std::optional<Difficulty> d = difficulty_from(difficulty);
    if (!d) {
        raise(ErrKind::usage, kOrigin, "difficulty must be atomic|composite|conditional");
    }
    SimEnv env = make_env(cfg.env);
    std::string out;
    for (int i = 0; i < n; ++i) {
        TaskSpec task = env.generate_task(mix_seed(seed, 0x67656eull + i), *d);
        out += task_to_json_line(task);
        out += "\n";
    }
    return out;
}

std::string csrs_extract_workflow(const RunConfig& cfg, const std::string& trajectories_path,
                                  const std::string& records_out) {
    std::vector<Trajectory> trajectories = read_trajectories(trajectories_path);
    std::unique_ptr<ExtractorInterface> extractor = make_extractor(cfg.csrs.extractor);
    RecordedOutcomeVerifier verifier;
    std::vector<ExtractionRecord> records;
    std::array<std::size_t, kExtractionCategoryCount + 1> by_category{};
    for (const Trajectory& t : trajectories) {
        TrajectoryLabel label = calibrate(t, verifier);
        std::vector<ExtractionRecord> recs = extract(t, label, *extractor);
        for (const ExtractionRecord& r : recs) {
            ++by_category[static_cast<std::size_t>(r.category)];
        }
        records.insert(records.end(), std::make_move_iterator(recs.begin()),
                       std::make_move_iterator(recs.end()));
    }
    write_records(records_out, records);
    nlohmann::json counts = nlohmann::json::object();
    for (int c = 1; c <= kExtractionCategoryCount; ++c) {
        counts[std::string(to_string(static_cast<ExtractionCategory>(c)))] =
            by_category[static_cast<std::size_t>(c)];
    }
    nlohmann::json j;
    j["trajectories"] = trajectories.size();
    j["records"] = records.size();
    j["by_category"] = std::move(counts);
    j["out"] = records_out;
    return j.dump(2);
}

std::string train_toy_workflow(const RunConfig& cfg, std::uint64_t seed, int jobs,
                               std::ostream* log) {
    DiagCsvSink sink(cfg.train.diagnostics_path, /*truncate=*/true);
    TrainResult result = train_toy(cfg, seed, &sink, jobs, log);
    return result.to_json();
}

std::string diagnose_workflow(const std::string& csv_path) {
    std::vector<DiagRecord> records = parse_diagnostics(csv_path);
    struct Column {
        const char* name;
        std::function<double(const DiagRecord&)> get;
    };
    const Column columns[] = {
        {"rollout_log_ppl", [](const DiagRecord& r) { return r.rollout_log_ppl; }},
        {"ppl_ratio", [](const DiagRecord& r) { return r.ppl_ratio; }},
        {"k3_kl", [](const DiagRecord& r) { return r.k3_kl; }},
        {"chi2_token", [](const DiagRecord& r) { return r.chi2_token; }},
        {"chi2_seq", [](const DiagRecord& r) { return r.chi2_seq; }},
        {"entropy", [](const DiagRecord& r) { return r.entropy; }},
        {"clip_fraction", [](const DiagRecord& r) { return r.clip_fraction; }},
    };
    nlohmann::json j;
    j["rows"] = records.size();
    for (const Column& col : columns) {
        if (records.empty()) {
            j[col.name] = nullptr;
            continue;
        }
        double mn = col.get(records.front());
        double mx = mn;
        double sum = 0.0;
        for (const DiagRecord& r : records) {
            double v = col.get(r);
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            sum += v;
        }
        j[col.name] = {{"mean", sum / static_cast<double>(records.size())},
                       {"min", mn},
                       {"max", mx},
                       {"last", col.get(records.back())}};
    }
    return j.dump(2);
}

}  // namespace guirl
