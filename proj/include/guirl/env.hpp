#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "guirl/action.hpp"

namespace guirl {

enum class WidgetKind : int { button, textfield, list_item, nav };

std::string_view to_string(WidgetKind kind);
std::optional<WidgetKind> widget_kind_from(std::string_view name);

struct Widget {
    std::string id;
    std::string text;
    WidgetKind kind = WidgetKind::button;
    BBox bbox;
    std::string on_click;  // screen id to navigate to; empty for none
    int page = 0;

    bool operator==(const Widget&) const = default;
};

struct Screen {
    std::string id;
    std::string name;
    std::string app;  // owning app id; empty for the launcher
    int page_count = 1;
    std::vector<Widget> widgets;

    bool operator==(const Screen&) const = default;
};

struct App {
    std::string id;
    std::string name;
    std::string root_screen;

    bool operator==(const App&) const = default;
};

/// Immutable symbolic UI world: a fixed set of apps, each a small navigation
/// graph of screens built from non-overlapping widgets. Shared read-only by
/// every episode.
class AppGraph {
public:
    static AppGraph builtin();

    static AppGraph load(const std::string& path);
    void save(const std::string& path) const;

    double screen_w() const { return screen_w_; }
    double screen_h() const { return screen_h_; }
    const std::string& start_screen() const { return start_screen_; }

    const std::vector<App>& apps() const { return apps_; }
    const App* find_app(const std::string& id) const;
    const App* find_app_by_name(const std::string& name) const;

    const std::vector<Screen>& screens() const { return screens_; }
    const Screen& screen(const std::string& id) const;
    bool has_screen(const std::string& id) const;

    const Widget* find_widget(const std::string& widget_id) const;

    /// Structural checks: unique ids, navigation targets resolve, widgets stay
    /// inside screen bounds, no two widgets on the same page overlap.
    void validate() const;

private:
    friend struct AppGraphBuilder;

    double screen_w_ = 1080.0;
    double screen_h_ = 2400.0;
    std::string start_screen_;
    std::vector<App> apps_;
    std::vector<Screen> screens_;
    std::map<std::string, std::size_t> screen_index_;
};

/// Conjunction-only goal language over the episode log:
///   clicked(<widget_id>)        the widget was clicked at least once
///   typed(<widget_id>,"text")   the field holds exactly this text at the end
///   on_screen(<screen_id>)      the episode ends on this screen
struct Predicate {
    enum class Kind : int { clicked, typed, on_screen };
    Kind kind = Kind::clicked;
    std::string subject;
    std::string text;  // only for typed

    bool operator==(const Predicate&) const = default;
};

struct VerifierProgram {
    std::vector<Predicate> conjuncts;

    std::string to_text() const;
    static VerifierProgram parse(const std::string& text);

    bool operator==(const VerifierProgram&) const = default;
};

enum class Difficulty : int { atomic, composite, conditional };

std::string_view to_string(Difficulty d);
std::optional<Difficulty> difficulty_from(std::string_view name);

struct TaskSpec {
    std::string id;
    std::string instruction;
    VerifierProgram verifier;
    std::vector<Action> gt_plan;
    Difficulty difficulty = Difficulty::atomic;

    bool operator==(const TaskSpec&) const = default;
};

std::string task_to_json_line(const TaskSpec& task);
TaskSpec task_from_json_line(const std::string& line, const std::string& origin);
std::vector<TaskSpec> read_tasks(const std::string& path);
void write_tasks(const std::string& path, const std::vector<TaskSpec>& tasks);

/// Mutable per-episode state. Everything the verifier can ask about lives
/// here; transitions are a pure function of (state, action).
struct EnvState {
    std::string screen;
    int page = 0;
    std::string focused_field;
    std::map<std::string, std::string> field_contents;
    std::vector<std::string> clicked;    // widget ids in click order
    std::vector<std::string> longpressed;
    std::vector<std::string> info_answers;
    int step_count = 0;
    bool done = false;

    bool operator==(const EnvState&) const = default;
};

/// What a policy sees: a deterministic textual render plus the symbolic
/// fields it is derived from.
struct Observation {
    std::string observation_id;  // stable hash of the render
    std::string render;
    std::string instruction;
    std::string screen_id;
    int page = 0;
    int page_count = 1;
    std::vector<Widget> visible_widgets;
    std::vector<std::string> clicked_texts;  // texts of widgets clicked so far
    std::string focused_field;               // widget id, empty if none
    std::map<std::string, std::string> field_contents;
    std::vector<std::string> history;  // serialized actions so far
    int step_count = 0;
};

struct StepResult {
    Observation observation;
    bool done = false;
};

class SimEnv;

/// One live episode: (task, seed) fixes the start; step() applies the shared
/// deterministic transition and enforces the step cap.
class Episode {
public:
    Episode(const SimEnv& env, TaskSpec task, std::uint64_t seed);

    const Observation& observation() const { return observation_; }
    const EnvState& state() const { return state_; }
    const TaskSpec& task() const { return task_; }
    bool done() const { return state_.done; }

    StepResult step(const Action& action);

private:
    const SimEnv* env_;
    TaskSpec task_;
    EnvState state_;
    std::vector<std::string> history_;
    Observation observation_;
};

class SimEnv {
public:
    explicit SimEnv(AppGraph graph, int step_cap = 20);

    const AppGraph& graph() const { return graph_; }
    int step_cap() const { return step_cap_; }

    /// Seeded task synthesis at the requested difficulty tier.
    TaskSpec generate_task(std::uint64_t seed, Difficulty difficulty) const;

    EnvState initial_state() const;

    /// Pure transition; does not check the step cap (Episode does).
    EnvState apply(const EnvState& state, const Action& action) const;

    Observation observe(const EnvState& state, const TaskSpec& task,
                        const std::vector<std::string>& history) const;

    bool verify(const EnvState& final_state, const VerifierProgram& program) const;

    Outcome verify_outcome(const EnvState& final_state, const TaskSpec& task) const;

    /// Copy of the task whose instruction gains a trailing hint block listing
    /// the ground-truth plan. Verifier and plan are unchanged.
    TaskSpec hint_augment(const TaskSpec& task) const;

    /// Replay a recorded action sequence from the initial state.
    EnvState replay(const TaskSpec& task, const std::vector<Action>& actions) const;

private:
    AppGraph graph_;
    int step_cap_;
};

/// Policy-side interface used by rollout collection.
struct ActResult {
    Action action;
    std::vector<double> token_logprobs;
};

class Actor {
public:
    virtual ~Actor() = default;
    virtual ActResult act(const Observation& observation, std::mt19937_64& rng) = 0;
};

/// Replays a fixed plan, then waits.
class PlanActor final : public Actor {
public:
    explicit PlanActor(std::vector<Action> plan) : plan_(std::move(plan)) {}
    ActResult act(const Observation& observation, std::mt19937_64& rng) override;

private:
    std::vector<Action> plan_;
    std::size_t next_ = 0;
};

/// Runs one episode to completion (COMPLETE action, or the step cap) and
/// labels the trajectory with the task verifier. The seed fixes both the
/// episode and the actor's sampling stream.
Trajectory rollout(Actor& actor, const SimEnv& env, const TaskSpec& task, std::uint64_t seed,
                   int max_steps = 0);

/// Splitmix64 stream used everywhere seeds are derived from other seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace guirl
