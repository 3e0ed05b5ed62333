#include "guirl/judge.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "guirl/action.hpp"
#include "httplib.h"
#include "json.hpp"

namespace guirl {

namespace {
constexpr const char* kOrigin = "judge";
}

std::string_view to_string(JudgeRubric rubric) {
    switch (rubric) {
        case JudgeRubric::content_verify: return "content_verify";
        case JudgeRubric::trajectory_quality: return "trajectory_quality";
    }
    return "content_verify";
}

std::optional<JudgeRubric> judge_rubric_from(std::string_view name) {
    if (name == "content_verify") return JudgeRubric::content_verify;
    if (name == "trajectory_quality") return JudgeRubric::trajectory_quality;
    return std::nullopt;
}

std::size_t levenshtein_distance(const std::string& a, const std::string& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

JudgeResponse MockJudge::score(const JudgeRequest& request) {
    if (request.rubric == JudgeRubric::content_verify) {
        const std::string& p = request.prediction;
        const std::string& r = request.reference;
        if (p.empty() && r.empty()) {
            return {1.0, "both empty"};
        }
        double denom = static_cast<double>(std::max(p.size(), r.size()));
        double dist = static_cast<double>(levenshtein_distance(p, r));
        return {1.0 - dist / denom, "edit distance " + std::to_string(static_cast<long long>(dist))};
    }
    // trajectory_quality: how much of the prediction is well-formed actions.
    std::istringstream in(request.prediction);
    std::string line;
    std::size_t total = 0;
    std::size_t good = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++total;
        try {
            parse_action(line);
            ++good;
        } catch (const Error&) {
        }
    }
    if (total == 0) {
        return {0.0, "no action lines"};
    }
    return {static_cast<double>(good) / static_cast<double>(total),
            std::to_string(good) + "/" + std::to_string(total) + " parseable"};
}

struct RemoteJudge::Impl {
    RemoteJudgeOptions options;
    std::string host;
    std::string path;
    std::mutex mu;
    std::condition_variable cv;
    int in_flight = 0;
    std::map<std::string, JudgeResponse> cache;

    explicit Impl(RemoteJudgeOptions opts) : options(std::move(opts)) {
        if (options.endpoint.empty()) {
            raise(ErrKind::config, kOrigin, "remote judge endpoint is empty");
        }
        // split http(s)://host[:port] from the path
        std::size_t scheme = options.endpoint.find("://");
        std::size_t path_at = options.endpoint.find(
            '/', scheme == std::string::npos ? 0 : scheme + 3);
        if (path_at == std::string::npos) {
            host = options.endpoint;
            path = "/";
        } else {
            host = options.endpoint.substr(0, path_at);
            path = options.endpoint.substr(path_at);
        }
        if (options.max_in_flight < 1) {
            raise(ErrKind::config, kOrigin, "max_in_flight must be >= 1");
        }
    }

    JudgeResponse post_once(const JudgeRequest& request) {
        httplib::Client client(host);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
        client.set_connection_timeout(secs.count(), 0);
        client.set_read_timeout(secs.count(), 0);
        client.set_write_timeout(secs.count(), 0);
        httplib::Headers headers;
        if (!options.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + options.api_key);
        }

        nlohmann::json body;
        body["rubric"] = std::string(to_string(request.rubric));
        body["prediction"] = request.prediction;
        body["reference"] = request.reference;
        if (request.context) {
            body["context"] = *request.context;
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
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            raise(ErrKind::judge_malformed, kOrigin, std::string("bad response json: ") + e.what());
        }
        if (!j.is_object() || !j.contains("score") || !j["score"].is_number()) {
            raise(ErrKind::judge_malformed, kOrigin, "response is missing a numeric score");
        }
        double score = j["score"].get<double>();
        if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
            raise(ErrKind::judge_malformed, kOrigin,
                  "score " + std::to_string(score) + " outside [0, 1]");
        }
        JudgeResponse out;
        out.score = score;
        if (j.contains("rationale") && j["rationale"].is_string()) {
            out.rationale = j["rationale"].get<std::string>();
        }
        return out;
    }

    JudgeResponse score(const JudgeRequest& request) {
        std::string key;
        if (options.cache_responses) {
            key = std::string(to_string(request.rubric)) + "\x1f" + request.prediction + "\x1f" +
                  request.reference + "\x1f" + request.context.value_or("");
            std::lock_guard<std::mutex> lock(mu);
            auto it = cache.find(key);
            if (it != cache.end()) {
                return it->second;
            }
        }
        {
            std::unique_lock<std::mutex> lock(mu);
            cv.wait(lock, [&] { return in_flight < options.max_in_flight; });
            ++in_flight;
        }
        JudgeResponse out;
        try {
            int attempts = options.max_retries + 1;
            for (int attempt = 0;; ++attempt) {
                try {
                    out = post_once(request);
                    break;
                } catch (const Error& e) {
                    bool retryable = e.kind() == ErrKind::judge_unavailable;
                    if (!retryable || attempt + 1 >= attempts) {
                        throw;
                    }
                    std::this_thread::sleep_for(options.backoff_base * (attempt + 1));
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            --in_flight;
            cv.notify_one();
            throw;
        }
        {
            std::lock_guard<std::mutex> lock(mu);
            --in_flight;
            if (options.cache_responses) {
                cache.emplace(std::move(key), out);
            }
            cv.notify_one();
        }
        return out;
    }
};

RemoteJudge::RemoteJudge(RemoteJudgeOptions options) : impl_(new Impl(std::move(options))) {}

RemoteJudge::~RemoteJudge() = default;

JudgeResponse RemoteJudge::score(const JudgeRequest& request) {
    return impl_->score(request);
}

std::unique_ptr<Judge> make_judge(const std::string& backend) {
    if (backend == "mock") {
        return std::make_unique<MockJudge>();
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
        return std::make_unique<RemoteJudge>(std::move(options));
    }
    raise(ErrKind::config, kOrigin, "unknown judge backend '" + backend + "'");
}

}  // namespace guirl
