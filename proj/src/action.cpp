#include "guirl/action.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "action";

void check_finite(double v, const std::string& origin, const char* what) {
    if (!std::isfinite(v)) {
        raise(ErrKind::domain, origin, std::string(what) + " must be finite");
    }
}

void check_point(Point p, const std::string& origin) {
    check_finite(p.x, origin, "x");
    check_finite(p.y, origin, "y");
    if (p.x < 0.0 || p.y < 0.0) {
        raise(ErrKind::domain, origin, "point coordinates must be non-negative");
    }
}

std::string format_coord(double v) {
    if (v == 0.0) {
        v = 0.0;  // collapse -0.0 so equal actions print identically
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string escape_text(const std::string& s) {
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

struct Parser {
    std::string_view s;
    std::size_t pos = 0;

    [[noreturn]] void fail(const std::string& message, std::size_t at) const {
        raise(ErrKind::parse, kOrigin, message, at);
    }

    void skip_spaces() {
        while (pos < s.size() && s[pos] == ' ') ++pos;
    }

    bool at_end() const { return pos >= s.size(); }

    char peek() const { return pos < s.size() ? s[pos] : '\0'; }

    void expect(char c) {
        if (at_end() || s[pos] != c) {
            fail(std::string("expected '") + c + "'", pos);
        }
        ++pos;
    }

    std::string parse_kind_word() {
        skip_spaces();
        std::size_t start = pos;
        while (pos < s.size() && s[pos] >= 'A' && s[pos] <= 'Z') ++pos;
        if (pos == start) {
            fail("expected action kind", start);
        }
        return std::string(s.substr(start, pos - start));
    }

    void parse_key(std::string_view key) {
        skip_spaces();
        std::size_t start = pos;
        if (s.substr(pos).substr(0, key.size()) != key) {
            fail("expected key '" + std::string(key) + "'", start);
        }
        pos += key.size();
        skip_spaces();
        expect('=');
    }

    double parse_number(bool allow_negative) {
        skip_spaces();
        std::size_t start = pos;
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
        std::size_t digits_start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == digits_start) {
            fail("expected number", start);
        }
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            std::size_t frac_start = pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
            if (pos == frac_start) {
                fail("expected digits after decimal point", frac_start);
            }
        }
        std::string token(s.substr(start, pos - start));
        double value = std::strtod(token.c_str(), nullptr);
        if (!std::isfinite(value)) {
            fail("number out of range", start);
        }
        if (!allow_negative && value < 0.0) {
            fail("coordinate must be non-negative", start);
        }
        return value;
    }

    std::string parse_string() {
        skip_spaces();
        if (at_end() || s[pos] != '"') {
            fail("expected '\"'", pos);
        }
        ++pos;
        std::string out;
        while (true) {
            if (at_end()) {
                fail("unterminated string", s.size());
            }
            char c = s[pos];
            if (c == '"') {
                ++pos;
                return out;
            }
            if (c == '\\') {
                if (pos + 1 >= s.size()) {
                    fail("dangling escape", pos);
                }
                char e = s[pos + 1];
                switch (e) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default: fail("unknown escape", pos);
                }
                pos += 2;
                continue;
            }
            if (static_cast<unsigned char>(c) < 0x20) {
                fail("raw control character in string", pos);
            }
            out.push_back(c);
            ++pos;
        }
    }

    void parse_comma() {
        skip_spaces();
        expect(',');
    }

    void parse_open() {
        skip_spaces();
        expect('(');
    }

    void parse_close_and_end() {
        skip_spaces();
        expect(')');
        skip_spaces();
        if (!at_end()) {
            fail("trailing characters after action", pos);
        }
    }
};

}  // namespace

void Tolerance::validate(const std::string& origin) const {
    for (double t : {tau_x, tau_y, tau_w, tau_h}) {
        if (!std::isfinite(t) || t <= 0.0) {
            raise(ErrKind::domain, origin, "tolerance scales must be positive and finite");
        }
    }
}

double normalized_deviation(double predicted, double target, double tau) {
    if (!std::isfinite(tau) || tau <= 0.0) {
        raise(ErrKind::domain, kOrigin, "tau must be positive and finite");
    }
    if (!std::isfinite(predicted) || !std::isfinite(target)) {
        raise(ErrKind::domain, kOrigin, "deviation inputs must be finite");
    }
    return std::abs(predicted - target) / tau;
}

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::awake: return "AWAKE";
        case ActionKind::click: return "CLICK";
        case ActionKind::complete: return "COMPLETE";
        case ActionKind::info: return "INFO";
        case ActionKind::longpress: return "LONGPRESS";
        case ActionKind::slide: return "SLIDE";
        case ActionKind::type: return "TYPE";
        case ActionKind::wait: return "WAIT";
    }
    return "WAIT";
}

std::optional<ActionKind> action_kind_from(std::string_view name) {
    for (ActionKind k : all_action_kinds()) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

Action Action::awake(std::string app) {
    return Action(ActionKind::awake, std::move(app));
}

Action Action::click(Point p) {
    check_point(p, kOrigin);
    return Action(ActionKind::click, p);
}

Action Action::complete() {
    return Action(ActionKind::complete, std::monostate{});
}

Action Action::info(std::string answer) {
    return Action(ActionKind::info, std::move(answer));
}

Action Action::longpress(Point p) {
    check_point(p, kOrigin);
    return Action(ActionKind::longpress, p);
}

Action Action::slide(Point start, Vec2 v) {
    check_point(start, kOrigin);
    check_finite(v.dx, kOrigin, "dx");
    check_finite(v.dy, kOrigin, "dy");
    return Action(ActionKind::slide, SlideGesture{start, v});
}

Action Action::type(std::string text) {
    return Action(ActionKind::type, std::move(text));
}

Action Action::wait() {
    return Action(ActionKind::wait, std::monostate{});
}

const Point& Action::point() const {
    if (!has_point()) {
        raise(ErrKind::domain, kOrigin, "action kind carries no point payload");
    }
    return std::get<Point>(payload_);
}

const SlideGesture& Action::gesture() const {
    if (kind_ != ActionKind::slide) {
        raise(ErrKind::domain, kOrigin, "action kind carries no gesture payload");
    }
    return std::get<SlideGesture>(payload_);
}

const std::string& Action::text() const {
    if (!has_text()) {
        raise(ErrKind::domain, kOrigin, "action kind carries no text payload");
    }
    return std::get<std::string>(payload_);
}

std::string serialize_action(const Action& action) {
    std::string out(to_string(action.kind()));
    out.push_back('(');
    switch (action.kind()) {
        case ActionKind::awake:
            out += "app=" + escape_text(action.text());
            break;
        case ActionKind::click:
        case ActionKind::longpress:
            out += "x=" + format_coord(action.point().x) + ",y=" + format_coord(action.point().y);
            break;
        case ActionKind::complete:
        case ActionKind::wait:
            break;
        case ActionKind::info:
            out += "answer=" + escape_text(action.text());
            break;
        case ActionKind::slide: {
            const SlideGesture& g = action.gesture();
            out += "x=" + format_coord(g.start.x) + ",y=" + format_coord(g.start.y) +
                   ",dx=" + format_coord(g.v.dx) + ",dy=" + format_coord(g.v.dy);
            break;
        }
        case ActionKind::type:
            out += "text=" + escape_text(action.text());
            break;
    }
    out.push_back(')');
    return out;
}

Action parse_action(std::string_view text) {
    Parser p{text};
    std::size_t kind_at = 0;
    p.skip_spaces();
    kind_at = p.pos;
    std::string word = p.parse_kind_word();
    std::optional<ActionKind> kind = action_kind_from(word);
    if (!kind) {
        p.fail("unknown action kind '" + word + "'", kind_at);
    }
    p.parse_open();
    Action out;
    switch (*kind) {
        case ActionKind::awake: {
            p.parse_key("app");
            out = Action::awake(p.parse_string());
            break;
        }
        case ActionKind::click:
        case ActionKind::longpress: {
            p.parse_key("x");
            double x = p.parse_number(false);
            p.parse_comma();
            p.parse_key("y");
            double y = p.parse_number(false);
            out = (*kind == ActionKind::click) ? Action::click({x, y}) : Action::longpress({x, y});
            break;
        }
        case ActionKind::complete:
            out = Action::complete();
            break;
        case ActionKind::info: {
            p.parse_key("answer");
            out = Action::info(p.parse_string());
            break;
        }
        case ActionKind::slide: {
            p.parse_key("x");
            double x = p.parse_number(false);
            p.parse_comma();
            p.parse_key("y");
            double y = p.parse_number(false);
            p.parse_comma();
            p.parse_key("dx");
            double dx = p.parse_number(true);
            p.parse_comma();
            p.parse_key("dy");
            double dy = p.parse_number(true);
            out = Action::slide({x, y}, {dx, dy});
            break;
        }
        case ActionKind::type: {
            p.parse_key("text");
            out = Action::type(p.parse_string());
            break;
        }
        case ActionKind::wait:
            out = Action::wait();
            break;
    }
    p.parse_close_and_end();
    return out;
}

std::string_view to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::unlabeled: return "unlabeled";
        case Outcome::success: return "success";
        case Outcome::failure: return "failure";
    }
    return "unlabeled";
}

std::optional<Outcome> outcome_from(std::string_view name) {
    if (name == "unlabeled") return Outcome::unlabeled;
    if (name == "success") return Outcome::success;
    if (name == "failure") return Outcome::failure;
    return std::nullopt;
}

void Step::validate(const std::string& origin) const {
    if (logprobs) {
        for (double lp : *logprobs) {
            if (!std::isfinite(lp) || lp > 0.0) {
                raise(ErrKind::domain, origin, "logprobs must be finite and <= 0");
            }
        }
    }
}

void Trajectory::validate(const std::string& origin) const {
    if (steps.empty()) {
        raise(ErrKind::domain, origin, "trajectory must contain at least one step");
    }
    for (const Step& s : steps) {
        s.validate(origin);
    }
}

void Trajectory::set_outcome(Outcome next) {
    if (outcome != Outcome::unlabeled && next != outcome) {
        raise(ErrKind::domain, "trajectory", "outcome is already labeled and cannot change");
    }
    outcome = next;
}

std::string trajectory_to_json_line(const Trajectory& trajectory) {
    nlohmann::json j;
    j["task"] = trajectory.task;
    j["steps"] = nlohmann::json::array();
    for (const Step& s : trajectory.steps) {
        nlohmann::json js;
        js["obs"] = s.observation_id;
        js["action"] = serialize_action(s.action);
        if (s.logprobs) {
            js["logprobs"] = *s.logprobs;
        }
        j["steps"].push_back(std::move(js));
    }
    j["outcome"] = std::string(to_string(trajectory.outcome));
    return j.dump();
}

Trajectory trajectory_from_json_line(const std::string& line, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, origin, std::string("invalid json: ") + e.what());
    }
    if (!j.is_object() || !j.contains("task") || !j.contains("steps") || !j.contains("outcome")) {
        raise(ErrKind::schema, origin, "trajectory line needs task, steps and outcome");
    }
    Trajectory t;
    try {
        t.task = j.at("task").get<std::string>();
        for (const auto& js : j.at("steps")) {
            Step s;
            s.observation_id = js.at("obs").get<std::string>();
            s.action = parse_action(js.at("action").get<std::string>());
            if (js.contains("logprobs")) {
                s.logprobs = js.at("logprobs").get<std::vector<double>>();
            }
            t.steps.push_back(std::move(s));
        }
        std::string outcome_name = j.at("outcome").get<std::string>();
        std::optional<Outcome> o = outcome_from(outcome_name);
        if (!o) {
            raise(ErrKind::schema, origin, "unknown outcome '" + outcome_name + "'");
        }
        t.outcome = *o;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::schema, origin, std::string("bad trajectory field: ") + e.what());
    }
    t.validate(origin);
    return t;
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, "trajectory_io", "cannot open '" + path + "' for reading");
    }
    std::vector<Trajectory> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::ostringstream origin;
        origin << path << ":" << line_no;
        out.push_back(trajectory_from_json_line(line, origin.str()));
    }
    return out;
}

void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, "trajectory_io", "cannot open '" + path + "' for writing");
    }
    for (const Trajectory& t : trajectories) {
        out << trajectory_to_json_line(t) << "\n";
    }
    if (!out) {
        raise(ErrKind::io, "trajectory_io", "write failed for '" + path + "'");
    }
}

}  // namespace guirl
