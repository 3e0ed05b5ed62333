#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "guirl/action.hpp"
#include "guirl/judge.hpp"

namespace guirl {

/// One ground-truth benchmark step. The payload depends on the kind:
/// CLICK/LONGPRESS carry one or more valid target regions, SLIDE carries a
/// displacement vector, the text kinds carry one or more reference strings,
/// WAIT/COMPLETE carry nothing.
struct Annotation {
    std::string step_id;
    std::string task;
    ActionKind gt_kind = ActionKind::wait;
    std::vector<BBox> regions;
    Vec2 vector{0.0, 0.0};
    std::vector<std::string> refs;

    void validate(const std::string& origin) const;
};

std::string annotations_to_json(const std::vector<Annotation>& annotations);
std::vector<Annotation> annotations_from_json(const std::string& text, const std::string& origin);
std::vector<Annotation> load_annotations(const std::string& path);
void save_annotations(const std::string& path, const std::vector<Annotation>& annotations);

struct Prediction {
    std::string step_id;
    Action action;
};

std::vector<Prediction> load_predictions(const std::string& path);
void save_predictions(const std::string& path, const std::vector<Prediction>& predictions);

struct StepScore {
    int type_hit = 0;   // predicted kind equals the annotated kind
    int value_hit = 0;  // payload correct too; never set without type_hit
};

/// A slide counts as a hit when its [0,1]-mapped cosine against the
/// annotation vector reaches this value (direction within 60 degrees).
inline constexpr double kSlideHitThreshold = 0.75;

/// Judged text (and INFO answers) count as hits at or above this score.
inline constexpr double kJudgeHitThreshold = 0.8;

/// Scores one prediction against its annotation. CLICK/LONGPRESS hit when the
/// point lands inside any region (closed boundaries). The text kinds (TYPE,
/// AWAKE, INFO) hit on an exact normalized match against any reference, or
/// else on a judge score of at least 0.8 when a judge is supplied.
/// WAIT/COMPLETE hit whenever the kind does.
StepScore score_step(const Action& pred, const Annotation& ann, Judge* judge = nullptr);

struct KindTally {
    int n = 0;
    int type_hits = 0;
    int value_hits = 0;

    double type_acc() const { return n == 0 ? 0.0 : 100.0 * type_hits / n; }
    double value_acc() const { return n == 0 ? 0.0 : 100.0 * value_hits / n; }
};

/// Column order used by every rendering: pointer and gesture kinds first,
/// then the text kinds, then the payload-free kinds, then the average.
constexpr std::array<ActionKind, kActionKindCount> kReportOrder = {
    ActionKind::click, ActionKind::type,     ActionKind::slide, ActionKind::awake,
    ActionKind::info,  ActionKind::complete, ActionKind::wait,  ActionKind::longpress,
};

struct ScoreReport {
    std::array<KindTally, kActionKindCount> per_kind{};  // indexed by ActionKind
    bool macro_average = false;

    const KindTally& tally(ActionKind kind) const {
        return per_kind[static_cast<std::size_t>(kind)];
    }
    int total_steps() const;
    /// Micro: value hits over all steps. Macro: mean of per-kind value
    /// accuracies across kinds that have steps.
    double micro_avg() const;
    double macro_avg() const;
    double avg() const { return macro_average ? macro_avg() : micro_avg(); }

    std::string render_table() const;
    std::string to_csv() const;
    std::string to_json() const;
};

/// Aggregates step scores per kind. Every prediction must match an annotated
/// step_id (UnknownStepId otherwise) and appear at most once; annotations
/// without a prediction score (0,0). The result is independent of input
/// order.
ScoreReport score_benchmark(const std::vector<Prediction>& preds,
                            const std::vector<Annotation>& anns, Judge* judge = nullptr,
                            bool macro_average = false);

}  // namespace guirl
