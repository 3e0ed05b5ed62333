#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <random>

#include "doctest.h"
#include "guirl/action.hpp"

using namespace guirl;

TEST_CASE("canonical serialization of every action kind") {
    CHECK(serialize_action(Action::click({100.0, 240.0})) == "CLICK(x=100.00,y=240.00)");
    CHECK(serialize_action(Action::longpress({0.5, 0.25})) == "LONGPRESS(x=0.50,y=0.25)");
    CHECK(serialize_action(Action::slide({10.0, 20.0}, {0.0, -300.0})) ==
          "SLIDE(x=10.00,y=20.00,dx=0.00,dy=-300.00)");
    CHECK(serialize_action(Action::type("hello")) == "TYPE(text=\"hello\")");
    CHECK(serialize_action(Action::awake("Mail")) == "AWAKE(app=\"Mail\")");
    CHECK(serialize_action(Action::info("42")) == "INFO(answer=\"42\")");
    CHECK(serialize_action(Action::wait()) == "WAIT()");
    CHECK(serialize_action(Action::complete()) == "COMPLETE()");
}

TEST_CASE("parse then serialize is the identity on canonical strings") {
    const char* samples[] = {
        "CLICK(x=100.00,y=240.00)",
        "LONGPRESS(x=0.00,y=2399.99)",
        "SLIDE(x=540.00,y=1200.00,dx=0.00,dy=-600.00)",
        "TYPE(text=\"a b c\")",
        "AWAKE(app=\"Shop\")",
        "INFO(answer=\"blue\")",
        "WAIT()",
        "COMPLETE()",
    };
    for (const char* s : samples) {
        CAPTURE(s);
        CHECK(serialize_action(parse_action(s)) == s);
    }
}

TEST_CASE("serialize then parse recovers the action for 2dp coordinates") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> coord_cents(0, 120000);
    std::uniform_int_distribution<int> delta_cents(-120000, 120000);
    for (int i = 0; i < 500; ++i) {
        Point p{coord_cents(rng) / 100.0, coord_cents(rng) / 100.0};
        Vec2 v{delta_cents(rng) / 100.0, delta_cents(rng) / 100.0};
        Action a = Action::click(p);
        Action b = Action::slide(p, v);
        Action c = Action::longpress(p);
        CHECK(parse_action(serialize_action(a)) == a);
        CHECK(parse_action(serialize_action(b)) == b);
        CHECK(parse_action(serialize_action(c)) == c);
    }
}

TEST_CASE("string payloads round-trip through escapes") {
    const std::string texts[] = {
        "plain",
        "with \"quotes\"",
        "back\\slash",
        "line\nbreak and\ttab",
        "",
        "trailing space ",
        "unicode bytes \xc3\xa9",
    };
    for (const std::string& t : texts) {
        CAPTURE(t);
        CHECK(parse_action(serialize_action(Action::type(t))).text() == t);
        CHECK(parse_action(serialize_action(Action::info(t))).text() == t);
        CHECK(parse_action(serialize_action(Action::awake(t))).text() == t);
    }
}

TEST_CASE("spaces between tokens are tolerated") {
    Action a = parse_action("CLICK( x = 1.00 , y = 2.00 )");
    CHECK(a.kind() == ActionKind::click);
    CHECK(a.point() == Point{1.0, 2.0});
    CHECK(parse_action("  WAIT(  )  ").kind() == ActionKind::wait);
}

TEST_CASE("malformed action strings raise parse errors with a byte offset") {
    const char* bad[] = {
        "CLACK(x=1,y=2)",            // unknown kind
        "CLICK(x=1.0)",              // missing y
        "CLICK(y=2.0,x=1.0",         // unterminated
        "CLICK(x=one,y=2)",          // non-numeric
        "TYPE(text=unquoted)",       // missing quotes
        "TYPE(text=\"open)",         // unterminated string
        "WAIT(x=1)",                 // payload on a payload-free kind
        "CLICK(x=1.0,y=2.0)trail",   // trailing garbage
        "",                          // empty input
        "SLIDE(x=1,y=2,dx=0,dy=0)trailing",
    };
    for (const char* s : bad) {
        CAPTURE(s);
        try {
            parse_action(s);
            FAIL_CHECK("expected a parse error for: ", s);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrKind::parse);
            CHECK(e.byte_offset().has_value());
        }
    }
}

TEST_CASE("payload accessors are guarded by kind") {
    Action w = Action::wait();
    CHECK_FALSE(w.has_point());
    CHECK_FALSE(w.has_text());
    CHECK_THROWS_AS(w.point(), Error);
    CHECK_THROWS_AS(w.text(), Error);
    CHECK_THROWS_AS(w.gesture(), Error);
    CHECK(Action::click({1, 2}).has_point());
    CHECK(Action::type("x").has_text());
}

TEST_CASE("every kind name round-trips through the string mapping") {
    for (ActionKind k : all_action_kinds()) {
        auto back = action_kind_from(to_string(k));
        REQUIRE(back.has_value());
        CHECK(*back == k);
    }
    CHECK_FALSE(action_kind_from("SWIPE").has_value());
}

TEST_CASE("normalized_deviation scales by tau and rejects bad input") {
    CHECK(normalized_deviation(10.0, 4.0, 2.0) == doctest::Approx(3.0));
    CHECK(normalized_deviation(4.0, 10.0, 2.0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(normalized_deviation(1.0, 2.0, 0.0), Error);
    CHECK_THROWS_AS(normalized_deviation(1.0, 2.0, -5.0), Error);
}

TEST_CASE("bbox closed-boundary containment") {
    BBox b{100.0, 100.0, 40.0, 20.0};
    CHECK(b.contains({80.0, 90.0}));    // corner
    CHECK(b.contains({120.0, 110.0}));  // opposite corner
    CHECK(b.contains({100.0, 100.0}));
    CHECK_FALSE(b.contains({79.99, 100.0}));
    CHECK_FALSE(b.contains({100.0, 110.01}));
}

TEST_CASE("outcome labels can only move off unlabeled") {
    Trajectory t;
    t.task = "t";
    CHECK(t.outcome == Outcome::unlabeled);
    t.set_outcome(Outcome::success);
    CHECK(t.outcome == Outcome::success);
    t.set_outcome(Outcome::success);  // idempotent relabel is fine
    CHECK_THROWS_AS(t.set_outcome(Outcome::failure), Error);
    CHECK_THROWS_AS(t.set_outcome(Outcome::unlabeled), Error);
}

TEST_CASE("step validation rejects positive or non-finite logprobs") {
    Step s;
    s.observation_id = "obs";
    s.action = Action::wait();
    s.logprobs = std::vector<double>{-0.5, 0.0};
    CHECK_NOTHROW(s.validate("test"));
    s.logprobs = std::vector<double>{0.25};
    CHECK_THROWS_AS(s.validate("test"), Error);
    s.logprobs = std::vector<double>{std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(s.validate("test"), Error);
}

static Trajectory sample_trajectory() {
    Trajectory t;
    t.task = "Open 'Mail' and tap 'Compose'";
    Step s1;
    s1.observation_id = "obs-1";
    s1.action = Action::awake("Mail");
    s1.logprobs = std::vector<double>{-0.1, -0.7};
    Step s2;
    s2.observation_id = "obs-2";
    s2.action = Action::click({540.0, 1200.0});
    t.steps = {s1, s2};
    t.outcome = Outcome::success;
    return t;
}

TEST_CASE("trajectory json line round-trip preserves everything") {
    Trajectory t = sample_trajectory();
    std::string line = trajectory_to_json_line(t);
    Trajectory back = trajectory_from_json_line(line, "test");
    CHECK(back == t);
    CHECK(back.steps[0].logprobs.has_value());
    CHECK_FALSE(back.steps[1].logprobs.has_value());
}

TEST_CASE("trajectory jsonl files round-trip") {
    Trajectory a = sample_trajectory();
    Trajectory b = sample_trajectory();
    b.outcome = Outcome::failure;
    b.steps.pop_back();
    std::string path = "action_test_traj.jsonl";
    write_trajectories(path, {a, b});
    std::vector<Trajectory> back = read_trajectories(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == a);
    CHECK(back[1] == b);
    std::remove(path.c_str());
}

TEST_CASE("trajectory parsing is strict about schema") {
    CHECK_THROWS_AS(trajectory_from_json_line("not json", "test"), Error);
    CHECK_THROWS_AS(trajectory_from_json_line("{\"task\": \"t\"}", "test"), Error);
    CHECK_THROWS_AS(
        trajectory_from_json_line(
            "{\"task\": \"t\", \"steps\": [], \"outcome\": \"victory\"}", "test"),
        Error);
    CHECK_THROWS_AS(
        trajectory_from_json_line(
            "{\"task\": \"t\", \"steps\": [{\"obs\": \"o\", \"action\": \"NOPE()\"}], "
            "\"outcome\": \"success\"}",
            "test"),
        Error);
}
