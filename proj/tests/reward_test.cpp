#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "guirl/reward.hpp"

using namespace guirl;

namespace {

// Straight-line reimplementation used as a reference for the fuzz checks.
double ref_energy(const BBox& p, const BBox& g, const Tolerance& tol, double lambda) {
    auto q4 = [](double d) { return d * d * d * d; };
    return q4((p.cx - g.cx) / tol.tau_x) + q4((p.cy - g.cy) / tol.tau_y) +
           lambda * (q4((p.w - g.w) / tol.tau_w) + q4((p.h - g.h) / tol.tau_h));
}

}  // namespace

TEST_CASE("point reward peaks at the target and decays monotonically") {
    Tolerance tol;
    Point g{500.0, 700.0};
    CHECK(point_reward(g, g, tol) == 1.0);
    double prev = 1.0;
    for (double off = 10.0; off <= 200.0; off += 10.0) {
        double r = point_reward({g.x + off, g.y}, g, tol);
        CHECK(r < prev);
        CHECK(r > 0.0);
        prev = r;
    }
    // Symmetric in the deviation sign.
    CHECK(point_reward({g.x + 37.0, g.y - 11.0}, g, tol) ==
          point_reward({g.x - 37.0, g.y + 11.0}, g, tol));
}

TEST_CASE("point reward stays nearly flat inside the tolerance box") {
    Tolerance tol;  // 50 px scales
    Point g{100.0, 100.0};
    // At half a tolerance the quartic wall has barely started to bend.
    CHECK(point_reward({125.0, 100.0}, g, tol) > 0.93);
    // At two tolerances it has collapsed.
    CHECK(point_reward({200.0, 100.0}, g, tol) < 1e-6);
}

TEST_CASE("iou on hand-computed rectangles") {
    BBox a{50.0, 50.0, 100.0, 100.0};   // [0,100]^2
    BBox b{100.0, 50.0, 100.0, 100.0};  // [50,150]x[0,100]
    // inter = 50*100 = 5000, union = 10000+10000-5000 = 15000
    CHECK(iou(a, b) == doctest::Approx(5000.0 / 15000.0).epsilon(1e-12));
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    BBox far{500.0, 500.0, 10.0, 10.0};
    CHECK(iou(a, far) == 0.0);
    // Touching edges intersect with zero area.
    BBox touch{150.0, 50.0, 100.0, 100.0};
    CHECK(iou(a, touch) == 0.0);
}

TEST_CASE("iou is symmetric and bounded on random boxes") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> c(0.0, 1000.0);
    std::uniform_real_distribution<double> s(1.0, 400.0);
    for (int i = 0; i < 300; ++i) {
        BBox a{c(rng), c(rng), s(rng), s(rng)};
        BBox b{c(rng), c(rng), s(rng), s(rng)};
        double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0 + 1e-15);
    }
}

TEST_CASE("iou rejects degenerate boxes") {
    BBox ok{10.0, 10.0, 5.0, 5.0};
    CHECK_THROWS_AS(iou(ok, BBox{10.0, 10.0, 0.0, 5.0}), Error);
    CHECK_THROWS_AS(iou(BBox{10.0, 10.0, -1.0, 5.0}, ok), Error);
}

TEST_CASE("geometric energy matches a straight-line reference") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> c(0.0, 1200.0);
    std::uniform_real_distribution<double> s(4.0, 600.0);
    std::uniform_real_distribution<double> l(0.05, 2.0);
    Tolerance tol{40.0, 60.0, 30.0, 80.0};
    for (int i = 0; i < 300; ++i) {
        BBox p{c(rng), c(rng), s(rng), s(rng)};
        BBox g{c(rng), c(rng), s(rng), s(rng)};
        double lambda = l(rng);
        double want = ref_energy(p, g, tol, lambda);
        CHECK(geom_energy(p, g, tol, lambda) ==
              doctest::Approx(want).epsilon(1e-12));
    }
    BBox same{10.0, 10.0, 5.0, 5.0};
    CHECK(geom_energy(same, same, tol, 0.5) == 0.0);
}

TEST_CASE("box reward fuses the exponential and iou channels") {
    RewardConfig cfg;  // alpha 0.8, lambda 0.5
    BBox g{500.0, 500.0, 200.0, 100.0};
    CHECK(bbox_reward(g, g, cfg) == doctest::Approx(1.0).epsilon(1e-12));
    BBox p{520.0, 505.0, 190.0, 110.0};
    double expect = cfg.alpha_fuse * std::exp(-geom_energy(p, g, cfg.tol, cfg.lambda_dim)) +
                    (1.0 - cfg.alpha_fuse) * iou(p, g);
    CHECK(bbox_reward(p, g, cfg) == doctest::Approx(expect).epsilon(1e-12));
    // Far misses keep the iou floor at zero but the decay may leak ~0.
    BBox off{2000.0, 2000.0, 10.0, 10.0};
    CHECK(bbox_reward(off, g, cfg) >= 0.0);
    CHECK(bbox_reward(off, g, cfg) < 1e-9);
}

TEST_CASE("type gate is exact") {
    CHECK(action_type_reward(ActionKind::click, ActionKind::click) == 1.0);
    CHECK(action_type_reward(ActionKind::click, ActionKind::longpress) == 0.0);
    for (ActionKind k : all_action_kinds()) {
        CHECK(action_type_reward(k, k) == 1.0);
    }
}

TEST_CASE("slide reward maps cosine onto the unit interval") {
    Vec2 g{100.0, 0.0};
    CHECK(slide_reward({50.0, 0.0}, g) == doctest::Approx(1.0));       // same direction
    CHECK(slide_reward({0.0, 70.0}, g) == doctest::Approx(0.5));      // perpendicular
    CHECK(slide_reward({-30.0, 0.0}, g) == doctest::Approx(0.0));     // opposite
    double diag = slide_reward({50.0, 50.0}, g);                      // 45 degrees
    CHECK(diag == doctest::Approx((std::cos(M_PI / 4) + 1.0) / 2.0));
    CHECK(slide_reward({0.0, 0.0}, g) == 0.0);                        // zero prediction
    CHECK_THROWS_AS(slide_reward({1.0, 0.0}, Vec2{0.0, 0.0}), Error);  // zero ground truth
}

TEST_CASE("text normalization trims, collapses and casefolds") {
    CHECK(normalize_text("  Hello   World  ") == "hello world");
    CHECK(normalize_text("a\tb\nc") == "a b c");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("SAME") == normalize_text("same"));
}

TEST_CASE("joint reward gates on the action type") {
    RewardConfig cfg;
    RewardBreakdown b = joint_reward(Action::click({1, 2}), Action::type("x"), cfg);
    CHECK(b.type_score == 0.0);
    CHECK(b.total == 0.0);
}

TEST_CASE("joint reward scores payloads per kind") {
    RewardConfig cfg;
    // Matching click at the exact point.
    RewardBreakdown click = joint_reward(Action::click({300.0, 400.0}),
                                         Action::click({300.0, 400.0}), cfg);
    CHECK(click.type_score == 1.0);
    CHECK(click.value_score == doctest::Approx(1.0));
    CHECK(click.total == doctest::Approx(1.0));

    // Click value follows the quartic point decay.
    RewardBreakdown near = joint_reward(Action::click({330.0, 400.0}),
                                        Action::click({300.0, 400.0}), cfg);
    CHECK(near.value_score ==
          doctest::Approx(point_reward({330.0, 400.0}, {300.0, 400.0}, cfg.tol)));

    // Text kinds compare normalized strings.
    RewardBreakdown text = joint_reward(Action::type("  Hello  World "),
                                        Action::type("hello world"), cfg);
    CHECK(text.value_score == 1.0);
    RewardBreakdown miss = joint_reward(Action::type("goodbye"), Action::type("hello"), cfg);
    CHECK(miss.value_score == 0.0);

    // Payload-free kinds are full credit on a type match.
    CHECK(joint_reward(Action::wait(), Action::wait(), cfg).total == 1.0);
    CHECK(joint_reward(Action::complete(), Action::complete(), cfg).total == 1.0);

    // Slide follows the cosine map.
    RewardBreakdown slide = joint_reward(Action::slide({0, 0}, {0.0, -100.0}),
                                         Action::slide({5, 5}, {0.0, -80.0}), cfg);
    CHECK(slide.value_score == doctest::Approx(1.0));
}

TEST_CASE("judge fallback scores near-miss text when a judge is supplied") {
    RewardConfig cfg;
    MockJudge judge;
    // Without a judge an inexact text payload scores zero.
    CHECK(joint_reward(Action::info("abcd"), Action::info("abcx"), cfg).value_score == 0.0);
    // With a judge the fallback kicks in: 1 - lev/max(len) = 1 - 1/4.
    RewardBreakdown off = joint_reward(Action::info("abcd"), Action::info("abcx"), cfg, &judge);
    CHECK(off.value_score == doctest::Approx(0.75));
    // judge_weight 0 keeps the whole-action blend disabled.
    CHECK_FALSE(off.judge_score.has_value());
    CHECK(off.total == doctest::Approx(0.75));
}

TEST_CASE("judge blend mixes the whole-action judge score at judge_weight") {
    RewardConfig cfg;
    cfg.judge_weight = 0.5;
    MockJudge judge;
    RewardBreakdown on = joint_reward(Action::info("abcd"), Action::info("abcx"), cfg, &judge);
    REQUIRE(on.judge_score.has_value());
    // The blend judges the serialized actions: INFO(answer="abcd") vs
    // INFO(answer="abcx"), one edit over their nineteen characters.
    CHECK(*on.judge_score == doctest::Approx(18.0 / 19.0));
    CHECK(on.value_score == doctest::Approx(0.75));
    CHECK(on.total == doctest::Approx(0.5 * 0.75 + 0.5 * (18.0 / 19.0)));
}

TEST_CASE("reward config validation rejects out-of-range weights") {
    RewardConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.alpha_fuse = 1.2;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = RewardConfig{};
    cfg.lambda_dim = -0.1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = RewardConfig{};
    cfg.judge_weight = 2.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = RewardConfig{};
    cfg.tol.tau_x = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
