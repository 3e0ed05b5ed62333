#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "guirl/env.hpp"
#include "guirl/policy.hpp"
#include "json.hpp"

using namespace guirl;

TEST_CASE("builtin app graph is structurally valid") {
    AppGraph g = AppGraph::builtin();
    CHECK_NOTHROW(g.validate());
    CHECK(g.apps().size() >= 2);
    CHECK(g.has_screen(g.start_screen()));
    for (const App& app : g.apps()) {
        CHECK(g.find_app(app.id) != nullptr);
        CHECK(g.find_app_by_name(app.name) != nullptr);
        CHECK(g.has_screen(app.root_screen));
    }
    CHECK(g.find_app("no-such-app") == nullptr);
}

TEST_CASE("app graph save/load round-trip") {
    AppGraph g = AppGraph::builtin();
    std::string path = "env_test_graph.json";
    g.save(path);
    AppGraph back = AppGraph::load(path);
    CHECK(back.screen_w() == g.screen_w());
    CHECK(back.screen_h() == g.screen_h());
    CHECK(back.start_screen() == g.start_screen());
    CHECK(back.apps() == g.apps());
    CHECK(back.screens() == g.screens());
    std::remove(path.c_str());
}

TEST_CASE("graph loading enforces structural invariants") {
    AppGraph g = AppGraph::builtin();
    std::string path = "env_test_bad_graph.json";
    g.save(path);
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in);
    in.close();

    SUBCASE("unknown start screen") {
        j["start_screen"] = "nowhere";
    }
    SUBCASE("dangling navigation target") {
        j["screens"][0]["widgets"][0]["on_click"] = "missing-screen";
    }
    SUBCASE("duplicate screen id") {
        j["screens"][1]["id"] = j["screens"][0]["id"];
    }
    std::ofstream out(path);
    out << j.dump();
    out.close();
    CHECK_THROWS_AS(AppGraph::load(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("verifier programs round-trip through text") {
    VerifierProgram p;
    p.conjuncts.push_back({Predicate::Kind::clicked, "mail.compose", ""});
    p.conjuncts.push_back({Predicate::Kind::typed, "mail.subject", "Weekly report"});
    p.conjuncts.push_back({Predicate::Kind::on_screen, "mail.inbox", ""});
    std::string text = p.to_text();
    CHECK(VerifierProgram::parse(text) == p);
    CHECK_THROWS_AS(VerifierProgram::parse("exploded(the_moon)"), Error);
}

TEST_CASE("task generation is deterministic and difficulty-tagged") {
    SimEnv env(AppGraph::builtin(), 20);
    for (Difficulty d : {Difficulty::atomic, Difficulty::composite, Difficulty::conditional}) {
        TaskSpec a = env.generate_task(42, d);
        TaskSpec b = env.generate_task(42, d);
        CHECK(a == b);
        CHECK(a.difficulty == d);
        CHECK_FALSE(a.gt_plan.empty());
        CHECK_FALSE(a.verifier.conjuncts.empty());
    }
    std::set<std::string> ids;
    for (int s = 0; s < 50; ++s) {
        ids.insert(env.generate_task(s, Difficulty::atomic).id);
    }
    CHECK(ids.size() > 25);  // seeds spread over distinct tasks
}

TEST_CASE("ground-truth plans satisfy their own verifiers") {
    SimEnv env(AppGraph::builtin(), 20);
    for (Difficulty d : {Difficulty::atomic, Difficulty::composite, Difficulty::conditional}) {
        for (int s = 0; s < 60; ++s) {
            TaskSpec task = env.generate_task(mix_seed(1234, s), d);
            EnvState final_state = env.replay(task, task.gt_plan);
            CAPTURE(task.instruction);
            CHECK(env.verify_outcome(final_state, task) == Outcome::success);
        }
    }
}

TEST_CASE("composite plans are longer than atomic ones on average") {
    SimEnv env(AppGraph::builtin(), 20);
    double atomic_len = 0.0, composite_len = 0.0;
    const int n = 40;
    for (int s = 0; s < n; ++s) {
        atomic_len += env.generate_task(s, Difficulty::atomic).gt_plan.size();
        composite_len += env.generate_task(s, Difficulty::composite).gt_plan.size();
    }
    CHECK(composite_len / n > atomic_len / n);
}

TEST_CASE("task json lines round-trip") {
    SimEnv env(AppGraph::builtin(), 20);
    TaskSpec task = env.generate_task(7, Difficulty::conditional);
    TaskSpec back = task_from_json_line(task_to_json_line(task), "test");
    CHECK(back == task);
}

TEST_CASE("plan rollout reaches success and keeps the task id") {
    SimEnv env(AppGraph::builtin(), 20);
    TaskSpec task = env.generate_task(99, Difficulty::composite);
    PlanActor actor(task.gt_plan);
    Trajectory t = rollout(actor, env, task, 5);
    CHECK(t.outcome == Outcome::success);
    CHECK(t.task == task.id);
    CHECK(t.steps.size() >= task.gt_plan.size());
    CHECK_NOTHROW(t.validate("test"));
}

TEST_CASE("rollout truncation caps the step count and fails the episode") {
    SimEnv env(AppGraph::builtin(), 20);
    TaskSpec task = env.generate_task(99, Difficulty::composite);
    REQUIRE(task.gt_plan.size() > 2);
    PlanActor actor(task.gt_plan);
    Trajectory t = rollout(actor, env, task, 5, 2);
    CHECK(t.steps.size() == 2);
    CHECK(t.outcome == Outcome::failure);
}

TEST_CASE("the episode step cap ends stalled episodes") {
    SimEnv env(AppGraph::builtin(), 6);
    TaskSpec task = env.generate_task(3, Difficulty::atomic);
    Episode ep(env, task, 1);
    int steps = 0;
    while (!ep.done() && ep.state().step_count < env.step_cap()) {
        ep.step(Action::wait());
        ++steps;
        REQUIRE(steps <= 6);
    }
    CHECK(steps == 6);
    CHECK_FALSE(ep.done());  // waiting never satisfies the verifier
    try {
        ep.step(Action::wait());
        FAIL("stepping past the cap must raise");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::step_cap);
    }
    CHECK(env.verify_outcome(ep.state(), task) == Outcome::failure);
}

TEST_CASE("episode transitions are deterministic in (task, seed)") {
    SimEnv env(AppGraph::builtin(), 20);
    TaskSpec task = env.generate_task(11, Difficulty::atomic);
    PlanActor a1(task.gt_plan);
    PlanActor a2(task.gt_plan);
    Trajectory t1 = rollout(a1, env, task, 77);
    Trajectory t2 = rollout(a2, env, task, 77);
    CHECK(t1 == t2);
}

TEST_CASE("hint augmentation appends a parseable plan block") {
    SimEnv env(AppGraph::builtin(), 20);
    TaskSpec task = env.generate_task(21, Difficulty::composite);
    TaskSpec hinted = env.hint_augment(task);
    CHECK(hinted.verifier == task.verifier);
    CHECK(hinted.gt_plan == task.gt_plan);
    CHECK(hinted.instruction != task.instruction);
    CHECK(hinted.instruction.find(task.instruction) == 0);
    InstructionFacts facts = parse_instruction(hinted.instruction);
    CHECK(facts.hint_plan == task.gt_plan);
    CHECK(parse_instruction(task.instruction).hint_plan.empty());
}

TEST_CASE("observations render deterministically with stable ids") {
    SimEnv env(AppGraph::builtin(), 20);
    TaskSpec task = env.generate_task(31, Difficulty::atomic);
    EnvState s = env.initial_state();
    Observation o1 = env.observe(s, task, {});
    Observation o2 = env.observe(s, task, {});
    CHECK(o1.observation_id == o2.observation_id);
    CHECK(o1.render == o2.render);
    CHECK(o1.instruction == task.instruction);
    CHECK_FALSE(o1.visible_widgets.empty());

    EnvState after = env.apply(s, task.gt_plan.front());
    Observation o3 = env.observe(after, task, {serialize_action(task.gt_plan.front())});
    CHECK(o3.observation_id != o1.observation_id);
}

TEST_CASE("seed mixing is deterministic and spreads salts") {
    CHECK(mix_seed(1, 2) == mix_seed(1, 2));
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        seen.insert(mix_seed(42, i));
    }
    CHECK(seen.size() == 1000);
}

TEST_CASE("difficulty names round-trip") {
    for (Difficulty d : {Difficulty::atomic, Difficulty::composite, Difficulty::conditional}) {
        auto back = difficulty_from(to_string(d));
        REQUIRE(back.has_value());
        CHECK(*back == d);
    }
    CHECK_FALSE(difficulty_from("nightmare").has_value());
}
