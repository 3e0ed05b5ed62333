#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "guirl/error.hpp"

namespace guirl {

enum class JudgeRubric : int { content_verify, trajectory_quality };

std::string_view to_string(JudgeRubric rubric);
std::optional<JudgeRubric> judge_rubric_from(std::string_view name);

struct JudgeRequest {
    JudgeRubric rubric = JudgeRubric::content_verify;
    std::string prediction;
    std::string reference;
    std::optional<std::string> context;
};

struct JudgeResponse {
    double score = 0.0;  // always within [0, 1]
    std::string rationale;
};

class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeResponse score(const JudgeRequest& request) = 0;
};

/// Deterministic offline scorer.
///   content_verify: 1 - levenshtein(prediction, reference) / max(len, 1),
///   with two empty strings scoring 1.
///   trajectory_quality: fraction of non-empty prediction lines that parse as
///   canonical actions (0 when there are no lines).
class MockJudge final : public Judge {
public:
    JudgeResponse score(const JudgeRequest& request) override;
};

std::size_t levenshtein_distance(const std::string& a, const std::string& b);

struct RemoteJudgeOptions {
    std::string endpoint;  // e.g. http://host:port/judge
    std::string api_key;   // sent as a bearer token when non-empty
    int max_retries = 1;
    std::chrono::milliseconds timeout{30000};
    std::chrono::milliseconds backoff_base{250};
    int max_in_flight = 4;
    bool cache_responses = false;
};

/// HTTP judge. POSTs {"rubric", "prediction", "reference", "context"?} and
/// expects {"score": float in [0,1], "rationale"?: string}. One retry with
/// backoff on transport errors or 5xx; out-of-range or malformed scores are
/// reported as errors, never clamped.
class RemoteJudge final : public Judge {
public:
    explicit RemoteJudge(RemoteJudgeOptions options);
    ~RemoteJudge() override;

    JudgeResponse score(const JudgeRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// backend is "mock" or "remote". The remote backend reads JUDGE_ENDPOINT and
/// JUDGE_API_KEY from the environment and fails with a config error when the
/// endpoint is missing.
std::unique_ptr<Judge> make_judge(const std::string& backend);

}  // namespace guirl
