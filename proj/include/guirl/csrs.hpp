#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "guirl/env.hpp"
#include "guirl/judge.hpp"

namespace guirl {

enum class LabelSource : int { verifier, human };

struct TrajectoryLabel {
    Outcome verdict = Outcome::unlabeled;  // success or failure once set
    LabelSource source = LabelSource::verifier;
};

/// Seven-way taxonomy for extracted training data. Values 1..7; the first
/// six are knowledge categories and survive failures, action prediction is
/// harvested from successes only.
enum class ExtractionCategory : int {
    progress_tracking = 1,
    state_summary = 2,
    effect_prediction = 3,
    self_reflection = 4,
    state_verification = 5,
    intent_execution = 6,
    action_prediction = 7,
};

inline constexpr int kExtractionCategoryCount = 7;

std::string_view to_string(ExtractionCategory category);
std::optional<ExtractionCategory> extraction_category_from(int value);

struct ExtractionRecord {
    ExtractionCategory category = ExtractionCategory::progress_tracking;
    std::string trajectory_id;
    std::optional<std::size_t> step_index;
    std::string prompt;
    std::string target;
};

std::string record_to_json_line(const ExtractionRecord& record);
ExtractionRecord record_from_json_line(const std::string& line, const std::string& origin);
void write_records(const std::string& path, const std::vector<ExtractionRecord>& records);
std::vector<ExtractionRecord> read_records(const std::string& path);

struct PassRateLabel {
    std::string task_id;
    int n_rollouts = 0;
    int n_pass = 0;
    double rate = 0.0;
};

/// Decides trajectory success for calibration.
class VerifierInterface {
public:
    virtual ~VerifierInterface() = default;
    virtual Outcome judge(const Trajectory& trajectory) = 0;
    virtual LabelSource source() const { return LabelSource::verifier; }
};

/// Replays the trajectory's actions through the environment and applies the
/// task's verifier program to the final state.
class SimVerifier final : public VerifierInterface {
public:
    SimVerifier(const SimEnv& env, TaskSpec task) : env_(&env), task_(std::move(task)) {}
    Outcome judge(const Trajectory& trajectory) override;

private:
    const SimEnv* env_;
    TaskSpec task_;
};

/// Trusts the recorded outcome field (e.g. trajectories labeled offline by a
/// person). Unlabeled trajectories are an error.
class RecordedOutcomeVerifier final : public VerifierInterface {
public:
    explicit RecordedOutcomeVerifier(LabelSource source = LabelSource::human)
        : source_(source) {}
    Outcome judge(const Trajectory& trajectory) override;
    LabelSource source() const override { return source_; }

private:
    LabelSource source_;
};

TrajectoryLabel calibrate(const Trajectory& trajectory, VerifierInterface& verifier);

/// Turns one labeled trajectory into prompt/target records.
class ExtractorInterface {
public:
    virtual ~ExtractorInterface() = default;
    virtual std::vector<ExtractionRecord> extract(const Trajectory& trajectory,
                                                  const TrajectoryLabel& label) = 0;
};

/// Deterministic offline backend: fills fixed per-category templates from the
/// trajectory. Per step it yields progress tracking, state summary, effect
/// prediction and intent execution (plus action prediction on successes);
/// self-reflection and state verification are per trajectory.
class TemplateExtractor final : public ExtractorInterface {
public:
    std::vector<ExtractionRecord> extract(const Trajectory& trajectory,
                                          const TrajectoryLabel& label) override;
};

/// HTTP backend sharing the judge transport style: POSTs the trajectory and
/// category, expects {"prompt": ..., "target": ...}. Selective learning is
/// enforced locally regardless of what the server returns.
class RemoteExtractor final : public ExtractorInterface {
public:
    explicit RemoteExtractor(RemoteJudgeOptions options);
    ~RemoteExtractor() override;
    std::vector<ExtractionRecord> extract(const Trajectory& trajectory,
                                          const TrajectoryLabel& label) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::unique_ptr<ExtractorInterface> make_extractor(const std::string& backend);

/// Selective-learning gate on top of any generator: drops action-prediction
/// records for failures, requires all seven categories for successes.
std::vector<ExtractionRecord> extract(const Trajectory& trajectory, const TrajectoryLabel& label,
                                      ExtractorInterface& generator);

/// n independent rollouts with fresh seeds and a fresh actor each; rate is
/// the verified success fraction. When a verifier is supplied it re-judges
/// each trajectory; otherwise the rollout's own verified outcome counts.
PassRateLabel pass_rate_label(const TaskSpec& task,
                              const std::function<std::unique_ptr<Actor>()>& make_actor, int n,
                              const SimEnv& env, std::uint64_t seed_base,
                              VerifierInterface* verifier = nullptr);

struct RefinementSample {
    std::string id;
    PassRateLabel label;
    std::string curriculum;  // simple | functional | intent
};

struct PartitionedSample {
    RefinementSample sample;
    bool excluded = false;  // zero pass rate: kept out of early training
    bool weak = false;      // rate below the low threshold
};

struct Partition {
    std::vector<PartitionedSample> accepted;
    std::vector<PartitionedSample> rejected;
    double low = 0.3;
    double high = 0.8;
};

/// rate >= high -> accepted; everything else -> rejected (two-way cover),
/// with rate == 0 flagged excluded and rate < low flagged weak.
Partition partition_refinement(const std::vector<RefinementSample>& samples, double low,
                               double high);

struct StageEntry {
    std::string id;
    std::string kind;  // "sample" or "record"
    bool excluded = false;
    std::string curriculum;
};

struct StagePlan {
    std::vector<StageEntry> midtrain;
    std::vector<StageEntry> coldstart;
    std::vector<StageEntry> rlvr;

    std::string to_json() const;
};

/// Routing table: accepted samples -> midtrain + coldstart; rejected ->
/// coldstart; generation-flow extraction records -> coldstart + rlvr.
/// Cold-start entries are ordered by curriculum (simple, functional, intent).
StagePlan route(const Partition& partition, const std::vector<ExtractionRecord>& records);

std::string_view curriculum_for(Difficulty difficulty);

}  // namespace guirl
