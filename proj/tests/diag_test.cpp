#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "guirl/diag.hpp"

using namespace guirl;

TEST_CASE("rollout log perplexity is the mean negative logprob") {
    CHECK(rollout_log_ppl({-1.0, -3.0}) == doctest::Approx(2.0));
    CHECK(rollout_log_ppl({0.0}) == 0.0);
    CHECK_THROWS_AS(rollout_log_ppl({}), Error);
    CHECK_THROWS_AS(rollout_log_ppl({std::nan("")}), Error);
}

TEST_CASE("perplexity ratio compares train against rollout") {
    // train finds the data less likely -> ratio above one
    CHECK(ppl_ratio({-2.0, -2.0}, {-1.0, -1.0}) == doctest::Approx(std::exp(1.0)));
    CHECK(ppl_ratio({-1.0}, {-1.0}) == doctest::Approx(1.0));
    CHECK(ppl_ratio({-0.5}, {-1.5}) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(ppl_ratio({-1.0}, {-1.0, -2.0}), Error);
    CHECK_THROWS_AS(ppl_ratio({}, {}), Error);
}

TEST_CASE("k3 estimator is zero at zero and positive elsewhere") {
    CHECK(k3_kl({0.0}) == 0.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    for (int i = 0; i < 5000; ++i) {
        double d = u(rng);
        if (d == 0.0) continue;
        CHECK(k3_kl({d}) > 0.0);
    }
    CHECK(k3_kl({1.0, -1.0}) ==
          doctest::Approx(0.5 * ((std::exp(1.0) - 2.0) + (std::exp(-1.0) + 0.0))));
    CHECK_THROWS_AS(k3_kl({}), Error);
}

TEST_CASE("token chi2 is the mean squared weight deviation") {
    CHECK(chi2({1.0, 1.0}, Chi2Granularity::token, nullptr, kSeqWeightTrunc) == 0.0);
    CHECK(chi2({2.0, 0.5}, Chi2Granularity::token, nullptr, kSeqWeightTrunc) ==
          doctest::Approx(0.5 * (1.0 + 0.25)));
    CHECK_THROWS_AS(chi2({}, Chi2Granularity::token, nullptr, kSeqWeightTrunc), Error);
    CHECK_THROWS_AS(chi2({0.0}, Chi2Granularity::token, nullptr, kSeqWeightTrunc), Error);
    CHECK_THROWS_AS(chi2({-1.0}, Chi2Granularity::token, nullptr, kSeqWeightTrunc), Error);
}

TEST_CASE("sequence chi2 multiplies within bounds and truncates the product") {
    std::vector<double> ratios = {2.0, 3.0, 1.5, 0.5};
    std::vector<std::pair<std::size_t, std::size_t>> bounds = {{0, 2}, {2, 4}};
    // products: 6 -> truncated to 5, and 0.75
    double want = 0.5 * ((5.0 - 1.0) * (5.0 - 1.0) + (0.75 - 1.0) * (0.75 - 1.0));
    CHECK(chi2(ratios, Chi2Granularity::sequence, &bounds, 5.0) == doctest::Approx(want));

    // without truncation binding
    double raw = 0.5 * ((6.0 - 1.0) * (6.0 - 1.0) + (0.75 - 1.0) * (0.75 - 1.0));
    CHECK(chi2(ratios, Chi2Granularity::sequence, &bounds, 100.0) == doctest::Approx(raw));

    CHECK_THROWS_AS(chi2(ratios, Chi2Granularity::sequence, nullptr, 5.0), Error);
    std::vector<std::pair<std::size_t, std::size_t>> bad = {{0, 9}};
    CHECK_THROWS_AS(chi2(ratios, Chi2Granularity::sequence, &bad, 5.0), Error);
    std::vector<std::pair<std::size_t, std::size_t>> inverted = {{2, 2}};
    CHECK_THROWS_AS(chi2(ratios, Chi2Granularity::sequence, &inverted, 5.0), Error);
    CHECK_THROWS_AS(chi2(ratios, Chi2Granularity::sequence, &bounds, 0.0), Error);
}

TEST_CASE("record validation guards ranges") {
    DiagRecord r;
    r.ppl_ratio = 1.0;
    CHECK_NOTHROW(r.validate());
    r.ppl_ratio = 0.0;
    CHECK_THROWS_AS(r.validate(), Error);
    r = DiagRecord{};
    r.ppl_ratio = 1.0;
    r.k3_kl = -0.1;
    CHECK_THROWS_AS(r.validate(), Error);
    r = DiagRecord{};
    r.ppl_ratio = 1.0;
    r.clip_fraction = 1.5;
    CHECK_THROWS_AS(r.validate(), Error);
    r = DiagRecord{};
    r.ppl_ratio = 1.0;
    r.entropy = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(r.validate(), Error);
}

namespace {

DiagRecord sample_record(int step) {
    DiagRecord r;
    r.step = step;
    r.rollout_log_ppl = 1.25;
    r.ppl_ratio = 1.01;
    r.k3_kl = 0.002;
    r.chi2_token = 0.03;
    r.chi2_seq = 0.08;
    r.entropy = 0.7;
    r.clip_fraction = 0.125;
    return r;
}

}  // namespace

TEST_CASE("csv sink writes one header and appends rows") {
    std::string path = "diag_test_sink.csv";
    std::remove(path.c_str());
    DiagCsvSink sink(path);
    CHECK(sink.emit({sample_record(1), sample_record(2)}) == 2);
    CHECK(sink.emit({sample_record(3)}) == 1);

    std::ifstream in(path);
    std::string line;
    int lines = 0, headers = 0;
    while (std::getline(in, line)) {
        ++lines;
        if (line == DiagCsvSink::header()) ++headers;
    }
    CHECK(lines == 4);
    CHECK(headers == 1);
    std::remove(path.c_str());
}

TEST_CASE("truncating sink restarts the file") {
    std::string path = "diag_test_trunc.csv";
    {
        DiagCsvSink first(path);
        first.emit({sample_record(1), sample_record(2), sample_record(3)});
    }
    DiagCsvSink second(path, true);
    second.emit({sample_record(9)});
    std::vector<DiagRecord> rows = parse_diagnostics(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].step == 9);
    std::remove(path.c_str());
}

TEST_CASE("diagnostics round-trip through the csv") {
    std::string path = "diag_test_roundtrip.csv";
    std::remove(path.c_str());
    DiagCsvSink sink(path);
    std::vector<DiagRecord> out = {sample_record(1), sample_record(2)};
    out[1].k3_kl = 1e-9;
    out[1].entropy = -0.0;
    sink.emit(out);
    std::vector<DiagRecord> back = parse_diagnostics(path);
    REQUIRE(back.size() == out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(back[i].step == out[i].step);
        CHECK(back[i].rollout_log_ppl == out[i].rollout_log_ppl);
        CHECK(back[i].ppl_ratio == out[i].ppl_ratio);
        CHECK(back[i].k3_kl == out[i].k3_kl);
        CHECK(back[i].chi2_token == out[i].chi2_token);
        CHECK(back[i].chi2_seq == out[i].chi2_seq);
        CHECK(back[i].entropy == out[i].entropy);
        CHECK(back[i].clip_fraction == out[i].clip_fraction);
    }
    std::remove(path.c_str());
}

TEST_CASE("invalid records never reach the file") {
    std::string path = "diag_test_invalid.csv";
    std::remove(path.c_str());
    DiagCsvSink sink(path);
    DiagRecord bad = sample_record(1);
    bad.chi2_token = -1.0;
    CHECK_THROWS_AS(sink.emit({bad}), Error);
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content.empty());
    std::remove(path.c_str());
}

TEST_CASE("parsing rejects malformed csv") {
    std::string path = "diag_test_bad.csv";
    {
        std::ofstream out(path);
        out << DiagCsvSink::header() << "\n";
        out << "1,0.1,1.0,0.0,0.0,0.0,0.5\n";  // one field short
    }
    CHECK_THROWS_AS(parse_diagnostics(path), Error);
    {
        std::ofstream out(path);
        out << "step,wrong,header\n";
    }
    CHECK_THROWS_AS(parse_diagnostics(path), Error);
    std::remove(path.c_str());
    CHECK_THROWS_AS(parse_diagnostics(path), Error);  // missing file
}
