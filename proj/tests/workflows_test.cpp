#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "guirl/bench.hpp"
#include "guirl/workflows.hpp"
#include "json.hpp"

using namespace guirl;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.train.rounds = 12;
    cfg.train.tasks_per_round = 2;
    cfg.train.holdout_tasks = 8;
    cfg.grpo.group_size = 4;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("make_env picks the builtin graph or a fixture") {
    EnvConfig cfg;
    SimEnv builtin = make_env(cfg);
    CHECK(builtin.graph().apps().size() >= 2);
    CHECK(builtin.step_cap() == 20);

    std::string path = "workflows_test_graph.json";
    AppGraph::builtin().save(path);
    cfg.fixture_path = path;
    cfg.step_cap = 9;
    SimEnv fixture = make_env(cfg);
    CHECK(fixture.step_cap() == 9);
    CHECK(fixture.graph().screens() == builtin.graph().screens());
    std::remove(path.c_str());
    CHECK_THROWS_AS(make_env(cfg), Error);  // fixture path now dangles
}

TEST_CASE("holdout suites are deterministic and distinct per seed") {
    SimEnv env = make_env(EnvConfig{});
    std::vector<TaskSpec> a = holdout_suite(env, Difficulty::atomic, 10, 3);
    std::vector<TaskSpec> b = holdout_suite(env, Difficulty::atomic, 10, 3);
    CHECK(a == b);
    CHECK(a.size() == 10);
    std::set<std::string> ids;
    for (const TaskSpec& t : a) {
        ids.insert(t.id);
        CHECK(t.difficulty == Difficulty::atomic);
    }
    CHECK(ids.size() == a.size());
    std::vector<TaskSpec> other = holdout_suite(env, Difficulty::atomic, 10, 4);
    CHECK(other != a);
}

TEST_CASE("policy evaluation is a deterministic greedy success fraction") {
    SimEnv env = make_env(EnvConfig{});
    std::vector<TaskSpec> tasks = holdout_suite(env, Difficulty::atomic, 6, 1);
    ToyPolicy policy;
    double r1 = evaluate_policy(policy, env, tasks);
    double r2 = evaluate_policy(policy, env, tasks);
    CHECK(r1 == r2);
    CHECK(r1 >= 0.0);
    CHECK(r1 <= 1.0);
    CHECK(evaluate_policy(policy, env, {}) == 0.0);
}

TEST_CASE("toy training is deterministic and worker-count independent") {
    RunConfig cfg = tiny_config();
    TrainResult a = train_toy(cfg, 3, nullptr, 1, nullptr);
    TrainResult b = train_toy(cfg, 3, nullptr, 1, nullptr);
    TrainResult c = train_toy(cfg, 3, nullptr, 3, nullptr);
    CHECK(a.to_json() == b.to_json());
    CHECK(a.to_json() == c.to_json());
    CHECK(a.policy.table() == c.policy.table());
    CHECK(a.rounds.size() == 12);
    CHECK(a.mean_entropy > 0.0);
    CHECK(a.initial_success >= 0.0);
    CHECK(a.final_success <= 1.0);
    CHECK(a.hindsight_raised <= a.hindsight_fired);
    TrainResult other = train_toy(cfg, 4, nullptr, 1, nullptr);
    CHECK(other.to_json() != a.to_json());
}

TEST_CASE("training emits one validated diagnostics row per round") {
    RunConfig cfg = tiny_config();
    std::string path = "workflows_test_diag.csv";
    DiagCsvSink sink(path, true);
    train_toy(cfg, 6, &sink, 1, nullptr);
    std::vector<DiagRecord> rows = parse_diagnostics(path);
    REQUIRE(rows.size() == 12);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].step == static_cast<std::int64_t>(i + 1));
        CHECK_NOTHROW(rows[i].validate());
        CHECK(rows[i].entropy >= 0.0);
    }
    std::remove(path.c_str());
}

TEST_CASE("training logs progress lines when given a stream") {
    RunConfig cfg = tiny_config();
    cfg.train.rounds = 3;
    std::ostringstream log;
    train_toy(cfg, 1, nullptr, 1, &log);
    CHECK_FALSE(log.str().empty());
}

TEST_CASE("static scoring workflow renders every format") {
    std::vector<Annotation> anns;
    Annotation click;
    click.step_id = "s1";
    click.task = "t";
    click.gt_kind = ActionKind::click;
    click.regions = {{0.5, 0.5, 0.2, 0.2}};
    anns.push_back(click);
    Annotation wait;
    wait.step_id = "s2";
    wait.task = "t";
    wait.gt_kind = ActionKind::wait;
    anns.push_back(wait);
    std::vector<Prediction> preds = {
        {"s1", parse_action("CLICK(x=0.50,y=0.50)")},
        {"s2", parse_action("WAIT()")},
    };
    std::string apath = "workflows_test_anns.json";
    std::string ppath = "workflows_test_preds.jsonl";
    save_annotations(apath, anns);
    save_predictions(ppath, preds);

    std::string table = score_static_workflow(apath, ppath, "none", false, "table");
    CHECK(table.find("AVG") != std::string::npos);
    std::string csv = score_static_workflow(apath, ppath, "none", false, "csv");
    CHECK(csv.find("100.0") != std::string::npos);
    nlohmann::json j =
        nlohmann::json::parse(score_static_workflow(apath, ppath, "none", false, "json"));
    CHECK(j.at("avg").get<double>() == doctest::Approx(100.0));
    CHECK_THROWS_AS(score_static_workflow(apath, ppath, "none", false, "yaml"), Error);
    std::remove(apath.c_str());
    std::remove(ppath.c_str());
}

TEST_CASE("reward workflow averages paired per-step rewards") {
    SimEnv env = make_env(EnvConfig{});
    TaskSpec task = env.generate_task(9, Difficulty::composite);
    PlanActor actor(task.gt_plan);
    Trajectory t = rollout(actor, env, task, 9);
    std::string path_a = "workflows_test_traj.jsonl";
    std::string path_b = "workflows_test_gt.jsonl";
    write_trajectories(path_a, {t});
    write_trajectories(path_b, {t});
    nlohmann::json j =
        nlohmann::json::parse(reward_workflow(path_a, path_b, RewardConfig{}, "none"));
    CHECK(j.at("mean_total").get<double>() == doctest::Approx(1.0));
    REQUIRE(j.at("pairs").size() == 1);
    CHECK(j["pairs"][0].at("mean_total").get<double>() == doctest::Approx(1.0));

    // Mismatched pairing is an error, not a silent zero.
    Trajectory shorter = t;
    shorter.steps.pop_back();
    write_trajectories(path_b, {shorter});
    CHECK_THROWS_AS(reward_workflow(path_a, path_b, RewardConfig{}, "none"), Error);
    write_trajectories(path_b, {t, t});
    CHECK_THROWS_AS(reward_workflow(path_a, path_b, RewardConfig{}, "none"), Error);
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
}

TEST_CASE("task generation workflow emits parseable lines") {
    RunConfig cfg;
    std::string out = gen_tasks_workflow(cfg, 5, "composite", 11);
    std::istringstream in(out);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        TaskSpec task = task_from_json_line(line, "test");
        CHECK(task.difficulty == Difficulty::composite);
        ++n;
    }
    CHECK(n == 5);
    CHECK(gen_tasks_workflow(cfg, 5, "composite", 11) == out);
    CHECK_THROWS_AS(gen_tasks_workflow(cfg, 0, "composite", 11), Error);
    CHECK_THROWS_AS(gen_tasks_workflow(cfg, 3, "impossible", 11), Error);
}

TEST_CASE("extraction workflow counts by category and writes the records") {
    SimEnv env = make_env(EnvConfig{});
    TaskSpec task = env.generate_task(13, Difficulty::atomic);
    PlanActor good(task.gt_plan);
    Trajectory ok = rollout(good, env, task, 13);
    PlanActor idle({});
    Trajectory bad = rollout(idle, env, task, 13, 2);
    std::string tpath = "workflows_test_csrs.jsonl";
    std::string rpath = "workflows_test_records.jsonl";
    write_trajectories(tpath, {ok, bad});

    RunConfig cfg;
    nlohmann::json j = nlohmann::json::parse(csrs_extract_workflow(cfg, tpath, rpath));
    std::size_t n_ok = ok.steps.size();
    std::size_t n_bad = bad.steps.size();
    CHECK(j.at("trajectories") == 2);
    CHECK(j.at("records") == 5 * n_ok + 2 + 4 * n_bad + 2);
    CHECK(j["by_category"].at("action_prediction") == n_ok);
    CHECK(read_records(rpath).size() == j.at("records").get<std::size_t>());
    std::remove(tpath.c_str());
    std::remove(rpath.c_str());
}

TEST_CASE("training workflow truncates its diagnostics file per run") {
    RunConfig cfg = tiny_config();
    cfg.train.rounds = 4;
    cfg.train.diagnostics_path = "workflows_test_toy.csv";
    std::string first = train_toy_workflow(cfg, 2, 1, nullptr);
    std::string bytes_first = slurp(cfg.train.diagnostics_path);
    std::string second = train_toy_workflow(cfg, 2, 1, nullptr);
    CHECK(first == second);
    CHECK(slurp(cfg.train.diagnostics_path) == bytes_first);
    nlohmann::json j = nlohmann::json::parse(first);
    CHECK(j.at("rounds") == 4);

    nlohmann::json diag = nlohmann::json::parse(diagnose_workflow(cfg.train.diagnostics_path));
    CHECK(diag.at("rows") == 4);
    CHECK(diag.at("entropy").contains("mean"));
    CHECK(diag["entropy"].at("min").get<double>() <= diag["entropy"].at("max").get<double>());
    std::remove(cfg.train.diagnostics_path.c_str());
    CHECK_THROWS_AS(diagnose_workflow(cfg.train.diagnostics_path), Error);
}
