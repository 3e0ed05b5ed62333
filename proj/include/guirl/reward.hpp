#pragma once

#include <optional>
#include <string>

#include "guirl/action.hpp"
#include "guirl/judge.hpp"

namespace guirl {

struct RewardConfig {
    Tolerance tol{};
    double lambda_dim = 0.5;   // weight on the width/height energy terms
    double alpha_fuse = 0.8;   // exponential-vs-IoU mixing for boxes
    double judge_weight = 0.0; // semantic blending; 0 disables the judge path

    void validate() const;
};

struct RewardBreakdown {
    double type_score = 0.0;
    double value_score = 0.0;
    std::optional<double> judge_score;
    double total = 0.0;
};

/// exp(-(dx^4 + dy^4)) on tolerance-normalized deviations. Quartic walls:
/// nearly flat inside the tolerance box, collapsing fast outside it.
double point_reward(Point pred, Point gt, const Tolerance& tol);

/// Intersection over union for center-form boxes. Degenerate boxes
/// (non-positive or non-finite sizes) raise a domain error.
double iou(const BBox& a, const BBox& b);

/// dcx^4 + dcy^4 + lambda * (dw^4 + dh^4) on normalized deviations.
double geom_energy(const BBox& pred, const BBox& gt, const Tolerance& tol, double lambda_dim);

/// alpha * exp(-geom_energy) + (1 - alpha) * iou.
double bbox_reward(const BBox& pred, const BBox& gt, const RewardConfig& cfg);

/// 1 when the kinds match, 0 otherwise.
double action_type_reward(ActionKind pred, ActionKind gt);

/// Cosine similarity mapped onto [0, 1]: (cos + 1) / 2. A zero prediction
/// scores 0; a zero ground-truth vector is a domain error.
double slide_reward(Vec2 pred, Vec2 gt);

/// Whitespace-trimmed, space-collapsed, ASCII-casefolded copy of the input.
std::string normalize_text(const std::string& text);

/// Judge-backed text comparison under the content_verify rubric.
double semantic_reward(const std::string& pred, const std::string& gt, Judge& judge);

/// Full action-versus-action reward. The type gate is multiplicative, so
/// mismatched kinds score 0 regardless of payloads. With matching kinds the
/// value score follows the payload (point decay, slide cosine, normalized
/// text match with optional judge fallback, 1.0 for payload-free kinds) and
/// the judge blend applies when judge_weight > 0 and a judge is supplied.
RewardBreakdown joint_reward(const Action& pred, const Action& gt, const RewardConfig& cfg,
                             Judge* judge = nullptr);

}  // namespace guirl
