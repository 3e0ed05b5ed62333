#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guirl/error.hpp"

namespace guirl {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

struct Vec2 {
    double dx = 0.0;
    double dy = 0.0;

    bool operator==(const Vec2&) const = default;
};

/// Axis-aligned box in center/size form. Sizes must stay positive.
struct BBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    double left() const { return cx - w / 2.0; }
    double right() const { return cx + w / 2.0; }
    double top() const { return cy - h / 2.0; }
    double bottom() const { return cy + h / 2.0; }

    /// Closed-boundary membership test: edge hits count as inside.
    bool contains(Point p) const {
        return p.x >= left() && p.x <= right() && p.y >= top() && p.y <= bottom();
    }

    bool operator==(const BBox&) const = default;
};

/// Per-axis scale parameters used to turn raw pixel deviations into
/// dimensionless ones. All four must be strictly positive.
struct Tolerance {
    double tau_x = 50.0;
    double tau_y = 50.0;
    double tau_w = 50.0;
    double tau_h = 50.0;

    void validate(const std::string& origin) const;
};

/// |predicted - target| / tau. Raises a domain error for tau <= 0 or
/// non-finite inputs.
double normalized_deviation(double predicted, double target, double tau);

enum class ActionKind : int {
    awake,
    click,
    complete,
    info,
    longpress,
    slide,
    type,
    wait,
};

inline constexpr int kActionKindCount = 8;

constexpr std::array<ActionKind, kActionKindCount> all_action_kinds() {
    return {ActionKind::awake,     ActionKind::click, ActionKind::complete,
            ActionKind::info,      ActionKind::longpress, ActionKind::slide,
            ActionKind::type,      ActionKind::wait};
}

std::string_view to_string(ActionKind kind);
std::optional<ActionKind> action_kind_from(std::string_view name);

struct SlideGesture {
    Point start;
    Vec2 v;

    bool operator==(const SlideGesture&) const = default;
};

/// A single UI action. Construction goes through the static factories so the
/// payload shape always matches the kind: points for CLICK/LONGPRESS, a
/// gesture for SLIDE, text for TYPE/INFO/AWAKE, nothing for WAIT/COMPLETE.
class Action {
public:
    Action() : kind_(ActionKind::wait) {}

    static Action awake(std::string app);
    static Action click(Point p);
    static Action complete();
    static Action info(std::string answer);
    static Action longpress(Point p);
    static Action slide(Point start, Vec2 v);
    static Action type(std::string text);
    static Action wait();

    ActionKind kind() const noexcept { return kind_; }

    bool has_point() const noexcept {
        return kind_ == ActionKind::click || kind_ == ActionKind::longpress;
    }
    bool has_text() const noexcept {
        return kind_ == ActionKind::type || kind_ == ActionKind::info ||
               kind_ == ActionKind::awake;
    }

    const Point& point() const;
    const SlideGesture& gesture() const;
    const std::string& text() const;

    bool operator==(const Action&) const = default;

private:
    Action(ActionKind kind, std::variant<std::monostate, Point, SlideGesture, std::string> payload)
        : kind_(kind), payload_(std::move(payload)) {}

    ActionKind kind_;
    std::variant<std::monostate, Point, SlideGesture, std::string> payload_{};
};

/// Canonical text form, e.g. CLICK(x=100.00,y=240.00) or TYPE(text="hi").
/// Coordinates print with two decimals; strings are quoted with \" \\ \n \t
/// escapes. serialize_action(parse_action(s)) is the identity on canonical
/// strings and parse_action(serialize_action(a)) == a for actions whose
/// coordinates carry at most two decimals.
std::string serialize_action(const Action& action);

/// Strict parser for the canonical grammar KIND(key=value,...). Spaces are
/// tolerated between tokens. Raises a parse error carrying the byte offset of
/// the first offending character.
Action parse_action(std::string_view text);

enum class Outcome : int { unlabeled, success, failure };

std::string_view to_string(Outcome outcome);
std::optional<Outcome> outcome_from(std::string_view name);

struct Step {
    std::string observation_id;
    Action action;
    /// Per-token sampling logprobs, present only for model-generated steps.
    /// Every entry must be finite and <= 0.
    std::optional<std::vector<double>> logprobs;

    void validate(const std::string& origin) const;

    bool operator==(const Step&) const = default;
};

struct Trajectory {
    std::string task;
    std::vector<Step> steps;
    Outcome outcome = Outcome::unlabeled;

    void validate(const std::string& origin) const;

    /// Outcome may only move off unlabeled, never between labels.
    void set_outcome(Outcome next);

    bool operator==(const Trajectory&) const = default;
};

/// JSONL persistence. One trajectory per line:
///   {"task": ..., "steps": [{"obs": ..., "action": "<canonical>",
///    "logprobs": [...]}, ...], "outcome": "unlabeled|success|failure"}
std::string trajectory_to_json_line(const Trajectory& trajectory);
Trajectory trajectory_from_json_line(const std::string& line, const std::string& origin);
std::vector<Trajectory> read_trajectories(const std::string& path);
void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories);

}  // namespace guirl
