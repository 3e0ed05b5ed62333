#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <atomic>
#include <thread>

#include "doctest.h"
#include "guirl/judge.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace guirl;

TEST_CASE("levenshtein distance on known pairs") {
    CHECK(levenshtein_distance("", "") == 0);
    CHECK(levenshtein_distance("abc", "abc") == 0);
    CHECK(levenshtein_distance("abc", "") == 3);
    CHECK(levenshtein_distance("", "xy") == 2);
    CHECK(levenshtein_distance("kitten", "sitting") == 3);
    CHECK(levenshtein_distance("flaw", "lawn") == 2);
}

TEST_CASE("mock judge content verification is an edit-distance score") {
    MockJudge judge;
    JudgeRequest req;
    req.rubric = JudgeRubric::content_verify;
    req.prediction = "hello";
    req.reference = "hello";
    CHECK(judge.score(req).score == 1.0);

    req.prediction = "";
    req.reference = "";
    CHECK(judge.score(req).score == 1.0);

    req.prediction = "abcd";
    req.reference = "abcx";
    CHECK(judge.score(req).score == doctest::Approx(0.75));

    req.prediction = "zzzz";
    req.reference = "abcd";
    CHECK(judge.score(req).score == doctest::Approx(0.0));
}

TEST_CASE("mock judge trajectory quality counts parseable action lines") {
    MockJudge judge;
    JudgeRequest req;
    req.rubric = JudgeRubric::trajectory_quality;
    req.prediction = "CLICK(x=1.00,y=2.00)\nnot an action\nWAIT()\n";
    req.reference = "";
    CHECK(judge.score(req).score == doctest::Approx(2.0 / 3.0));
    req.prediction = "";
    CHECK(judge.score(req).score == 0.0);
}

TEST_CASE("rubric names round-trip") {
    for (JudgeRubric r : {JudgeRubric::content_verify, JudgeRubric::trajectory_quality}) {
        auto back = judge_rubric_from(to_string(r));
        REQUIRE(back.has_value());
        CHECK(*back == r);
    }
    CHECK_FALSE(judge_rubric_from("vibes").has_value());
}

TEST_CASE("judge factory validates the backend name") {
    CHECK(make_judge("mock") != nullptr);
    CHECK_THROWS_AS(make_judge("bogus"), Error);
}

namespace {

/// Local HTTP stub standing in for a remote judge service.
class JudgeServer {
public:
    explicit JudgeServer(std::function<void(const httplib::Request&, httplib::Response&)> h) {
        server_.Post("/judge", std::move(h));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~JudgeServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/judge";
    }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

RemoteJudgeOptions options_for(const JudgeServer& server) {
    RemoteJudgeOptions o;
    o.endpoint = server.endpoint();
    o.max_retries = 0;
    o.backoff_base = std::chrono::milliseconds(1);
    return o;
}

}  // namespace

TEST_CASE("remote judge posts the request and returns the score") {
    std::string seen_body;
    std::string seen_auth;
    JudgeServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        auto it = req.headers.find("Authorization");
        seen_auth = it == req.headers.end() ? "" : it->second;
        res.set_content("{\"score\": 0.65, \"rationale\": \"close\"}", "application/json");
    });
    RemoteJudgeOptions opts = options_for(server);
    opts.api_key = "sekrit";
    RemoteJudge judge(opts);
    JudgeRequest req;
    req.rubric = JudgeRubric::content_verify;
    req.prediction = "a";
    req.reference = "b";
    req.context = "extra";
    JudgeResponse resp = judge.score(req);
    CHECK(resp.score == doctest::Approx(0.65));
    CHECK(resp.rationale == "close");
    CHECK(seen_auth == "Bearer sekrit");
    nlohmann::json body = nlohmann::json::parse(seen_body);
    CHECK(body.at("rubric") == "content_verify");
    CHECK(body.at("prediction") == "a");
    CHECK(body.at("reference") == "b");
    CHECK(body.at("context") == "extra");
}

TEST_CASE("remote judge rejects out-of-range scores instead of clamping") {
    JudgeServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"score\": 1.5}", "application/json");
    });
    RemoteJudge judge(options_for(server));
    JudgeRequest req;
    try {
        judge.score(req);
        FAIL_CHECK("expected a malformed-judge error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::judge_malformed);
    }
}

TEST_CASE("remote judge rejects malformed response bodies") {
    JudgeServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "application/json");
    });
    RemoteJudge judge(options_for(server));
    JudgeRequest req;
    try {
        judge.score(req);
        FAIL_CHECK("expected a malformed-judge error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::judge_malformed);
    }
}

TEST_CASE("remote judge retries once on server errors then succeeds") {
    std::atomic<int> calls{0};
    JudgeServer server([&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) == 0) {
            res.status = 503;
            res.set_content("overloaded", "text/plain");
        } else {
            res.set_content("{\"score\": 0.25}", "application/json");
        }
    });
    RemoteJudgeOptions opts = options_for(server);
    opts.max_retries = 1;
    RemoteJudge judge(opts);
    JudgeRequest req;
    CHECK(judge.score(req).score == doctest::Approx(0.25));
    CHECK(calls.load() == 2);
}

TEST_CASE("remote judge reports persistent server failures as unavailable") {
    JudgeServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    RemoteJudgeOptions opts = options_for(server);
    opts.max_retries = 1;
    RemoteJudge judge(opts);
    JudgeRequest req;
    try {
        judge.score(req);
        FAIL_CHECK("expected an unavailable-judge error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrKind::judge_unavailable);
    }
}

TEST_CASE("remote judge construction requires an endpoint") {
    CHECK_THROWS_AS(RemoteJudge(RemoteJudgeOptions{}), Error);
}
