#include "guirl/reward.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace guirl {

namespace {

constexpr const char* kOrigin = "reward";

double pow4(double v) {
    double sq = v * v;
    return sq * sq;
}

void check_box(const BBox& b) {
    if (!std::isfinite(b.cx) || !std::isfinite(b.cy) || !std::isfinite(b.w) ||
        !std::isfinite(b.h) || b.w <= 0.0 || b.h <= 0.0) {
        raise(ErrKind::domain, kOrigin, "boxes need finite centers and positive sizes");
    }
}

double clamp01(double v) {
    return std::min(1.0, std::max(0.0, v));
}

}  // namespace

void RewardConfig::validate() const {
    tol.validate(kOrigin);
    if (!std::isfinite(lambda_dim) || lambda_dim < 0.0) {
        raise(ErrKind::domain, kOrigin, "lambda must be finite and >= 0");
    }
    if (!std::isfinite(alpha_fuse) || alpha_fuse < 0.0 || alpha_fuse > 1.0) {
        raise(ErrKind::domain, kOrigin, "alpha must lie in [0, 1]");
    }
    if (!std::isfinite(judge_weight) || judge_weight < 0.0 || judge_weight > 1.0) {
        raise(ErrKind::domain, kOrigin, "judge_weight must lie in [0, 1]");
    }
}

double point_reward(Point pred, Point gt, const Tolerance& tol) {
    tol.validate(kOrigin);
    double dx = normalized_deviation(pred.x, gt.x, tol.tau_x);
    double dy = normalized_deviation(pred.y, gt.y, tol.tau_y);
    return std::exp(-(pow4(dx) + pow4(dy)));
}

double iou(const BBox& a, const BBox& b) {
    check_box(a);
    check_box(b);
    double iw = std::min(a.right(), b.right()) - std::max(a.left(), b.left());
    double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top());
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    double inter = iw * ih;
    double uni = a.w * a.h + b.w * b.h - inter;
    return inter / uni;
}

double geom_energy(const BBox& pred, const BBox& gt, const Tolerance& tol, double lambda_dim) {
    check_box(pred);
    check_box(gt);
    tol.validate(kOrigin);
    if (!std::isfinite(lambda_dim) || lambda_dim < 0.0) {
        raise(ErrKind::domain, kOrigin, "lambda must be finite and >= 0");
    }
    double dcx = normalized_deviation(pred.cx, gt.cx, tol.tau_x);
    double dcy = normalized_deviation(pred.cy, gt.cy, tol.tau_y);
    double dw = normalized_deviation(pred.w, gt.w, tol.tau_w);
    double dh = normalized_deviation(pred.h, gt.h, tol.tau_h);
    return pow4(dcx) + pow4(dcy) + lambda_dim * (pow4(dw) + pow4(dh));
}

double bbox_reward(const BBox& pred, const BBox& gt, const RewardConfig& cfg) {
    cfg.validate();
    double e = geom_energy(pred, gt, cfg.tol, cfg.lambda_dim);
    return cfg.alpha_fuse * std::exp(-e) + (1.0 - cfg.alpha_fuse) * iou(pred, gt);
}

double action_type_reward(ActionKind pred, ActionKind gt) {
    return pred == gt ? 1.0 : 0.0;
}

double slide_reward(Vec2 pred, Vec2 gt) {
    if (!std::isfinite(pred.dx) || !std::isfinite(pred.dy) || !std::isfinite(gt.dx) ||
        !std::isfinite(gt.dy)) {
        raise(ErrKind::domain, kOrigin, "slide vectors must be finite");
    }
    double gt_norm = std::hypot(gt.dx, gt.dy);
    if (gt_norm == 0.0) {
        raise(ErrKind::domain, kOrigin, "ground-truth slide vector must be non-zero");
    }
    double pred_norm = std::hypot(pred.dx, pred.dy);
    if (pred_norm == 0.0) {
        return 0.0;
    }
    double cosine = (pred.dx * gt.dx + pred.dy * gt.dy) / (pred_norm * gt_norm);
    cosine = std::min(1.0, std::max(-1.0, cosine));
    return (cosine + 1.0) / 2.0;
}

std::string normalize_text(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    bool seen_any = false;
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            pending_space = seen_any;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(u)));
        seen_any = true;
    }
    return out;
}

double semantic_reward(const std::string& pred, const std::string& gt, Judge& judge) {
    JudgeRequest request;
    request.rubric = JudgeRubric::content_verify;
    request.prediction = pred;
    request.reference = gt;
    JudgeResponse response = judge.score(request);
    if (!std::isfinite(response.score) || response.score < 0.0 || response.score > 1.0) {
        raise(ErrKind::judge_malformed, kOrigin, "judge returned a score outside [0, 1]");
    }
    return response.score;
}

RewardBreakdown joint_reward(const Action& pred, const Action& gt, const RewardConfig& cfg,
                             Judge* judge) {
    cfg.validate();
    RewardBreakdown out;
    out.type_score = action_type_reward(pred.kind(), gt.kind());
    if (out.type_score == 0.0) {
        out.total = 0.0;
        return out;
    }
    switch (gt.kind()) {
        case ActionKind::click:
        case ActionKind::longpress:
            out.value_score = point_reward(pred.point(), gt.point(), cfg.tol);
            break;
        case ActionKind::slide:
            out.value_score = slide_reward(pred.gesture().v, gt.gesture().v);
            break;
        case ActionKind::type:
        case ActionKind::awake:
        case ActionKind::info: {
            bool exact = normalize_text(pred.text()) == normalize_text(gt.text());
            if (exact) {
                out.value_score = 1.0;
            } else if (judge != nullptr) {
                out.value_score = semantic_reward(pred.text(), gt.text(), *judge);
            } else {
                out.value_score = 0.0;
            }
            break;
        }
        case ActionKind::wait:
        case ActionKind::complete:
            out.value_score = 1.0;
            break;
    }
    double blended = out.value_score;
    if (judge != nullptr && cfg.judge_weight > 0.0) {
        double js = semantic_reward(serialize_action(pred), serialize_action(gt), *judge);
        out.judge_score = js;
        blended = (1.0 - cfg.judge_weight) * out.value_score + cfg.judge_weight * js;
    }
    out.total = clamp01(out.type_score * blended);
    return out;
}

}  // namespace guirl
