#include "guirl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "toy_policy";

std::string trim_spaces(const std::string& s) {
    std::size_t b = s.find_first_not_of(' ');
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(' ');
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(Role role) {
    switch (role) {
        case Role::awake_app: return "AWAKE_APP";
        case Role::click_goal: return "CLICK_GOAL";
        case Role::type_goal: return "TYPE_GOAL";
        case Role::slide_next: return "SLIDE_NEXT";
        case Role::click_other: return "CLICK_OTHER";
        case Role::wait_idle: return "WAIT_IDLE";
        case Role::complete: return "COMPLETE";
    }
    return "WAIT_IDLE";
}

InstructionFacts parse_instruction(const std::string& instruction) {
    InstructionFacts facts;
    std::string base = instruction;
    std::size_t hint_at = instruction.find("\n[hint]");
    if (hint_at != std::string::npos) {
        base = instruction.substr(0, hint_at);
        std::string hint = instruction.substr(hint_at + 7);
        std::size_t pos = 0;
        while (pos <= hint.size()) {
            std::size_t semi = hint.find(';', pos);
            std::string seg = trim_spaces(
                semi == std::string::npos ? hint.substr(pos) : hint.substr(pos, semi - pos));
            if (!seg.empty()) {
                try {
                    facts.hint_plan.push_back(parse_action(seg));
                } catch (const Error&) {
                    // a hint the agent cannot read is no hint at all
                }
            }
            if (semi == std::string::npos) break;
            pos = semi + 1;
        }
    }

    std::size_t open_at = base.find("Open ");
    if (open_at != std::string::npos) {
        std::size_t start = open_at + 5;
        std::size_t end = base.find_first_of(",.", start);
        std::string seg =
            base.substr(start, end == std::string::npos ? std::string::npos : end - start);
        std::size_t and_at = seg.find(" and ");
        if (and_at != std::string::npos) {
            seg = seg.substr(0, and_at);
        }
        facts.app_name = trim_spaces(seg);
    }

    // single-quoted click targets, skipping anything inside double quotes
    bool in_double = false;
    for (std::size_t i = 0; i < base.size(); ++i) {
        char c = base[i];
        if (c == '"') {
            in_double = !in_double;
            continue;
        }
        if (c == '\'' && !in_double) {
            std::size_t close = base.find('\'', i + 1);
            if (close == std::string::npos) break;
            facts.click_targets.push_back(base.substr(i + 1, close - i - 1));
            i = close;
        }
    }

    // "text" into 'Field' pairs
    std::size_t pos = 0;
    while (true) {
        std::size_t open = base.find('"', pos);
        if (open == std::string::npos) break;
        std::size_t close = base.find('"', open + 1);
        if (close == std::string::npos) break;
        std::string text = base.substr(open + 1, close - open - 1);
        if (base.compare(close + 1, 7, " into '") == 0) {
            std::size_t field_start = close + 8;
            std::size_t field_end = base.find('\'', field_start);
            if (field_end != std::string::npos) {
                facts.type_goals.emplace_back(text,
                                              base.substr(field_start, field_end - field_start));
            }
        }
        pos = close + 1;
    }
    return facts;
}

StateContext analyze_observation(const Observation& observation, const AppGraph& graph) {
    InstructionFacts facts = parse_instruction(observation.instruction);
    StateContext ctx;

    const App* app = facts.app_name.empty() ? nullptr : graph.find_app_by_name(facts.app_name);
    bool app_known = app != nullptr;
    bool app_open = app_known && graph.screen(observation.screen_id).app == app->id;

    std::set<std::string> clicked(observation.clicked_texts.begin(),
                                  observation.clicked_texts.end());
    std::vector<std::string> pending;
    for (const std::string& t : facts.click_targets) {
        if (!clicked.count(t)) {
            pending.push_back(t);
        }
    }
    std::set<std::string> pending_set(pending.begin(), pending.end());

    const Widget* goal_widget = nullptr;
    for (const std::string& t : pending) {
        for (const Widget& w : observation.visible_widgets) {
            if (w.text == t) {
                goal_widget = &w;
                break;
            }
        }
        if (goal_widget != nullptr) break;
    }

    // first unsatisfied type goal; satisfied means some field whose widget
    // text matches already holds the requested text
    const std::pair<std::string, std::string>* open_goal = nullptr;
    for (const auto& goal : facts.type_goals) {
        bool satisfied = false;
        for (const auto& [field_id, value] : observation.field_contents) {
            if (value != goal.first) continue;
            const Widget* w = graph.find_widget(field_id);
            if (w != nullptr && w->text == goal.second) {
                satisfied = true;
                break;
            }
        }
        if (!satisfied) {
            open_goal = &goal;
            break;
        }
    }
    bool type_ready = false;
    if (open_goal != nullptr && !observation.focused_field.empty()) {
        const Widget* focused = graph.find_widget(observation.focused_field);
        type_ready = focused != nullptr && focused->text == open_goal->second;
    }

    bool slide_avail = observation.page + 1 < observation.page_count;

    const Widget* other_widget = nullptr;
    for (const Widget& w : observation.visible_widgets) {
        if (!pending_set.count(w.text)) {
            other_widget = &w;
            break;
        }
    }

    std::uint32_t bits = 0;
    bits |= app_known ? 1u << 0 : 0;
    bits |= app_open ? 1u << 1 : 0;
    bits |= goal_widget != nullptr ? 1u << 2 : 0;
    bits |= !pending.empty() ? 1u << 3 : 0;
    bits |= type_ready ? 1u << 4 : 0;
    bits |= open_goal != nullptr ? 1u << 5 : 0;
    bits |= slide_avail ? 1u << 6 : 0;
    bits |= other_widget != nullptr ? 1u << 7 : 0;
    char key[8];
    std::snprintf(key, sizeof(key), "s%02x", bits);
    ctx.key = key;

    auto enable = [&](Role role, const Action& action) {
        int r = static_cast<int>(role);
        ctx.mask |= 1u << r;
        ctx.actions[r] = action;
    };
    if (app_known) {
        enable(Role::awake_app, Action::awake(app->id));
    }
    if (goal_widget != nullptr) {
        enable(Role::click_goal, Action::click({goal_widget->bbox.cx, goal_widget->bbox.cy}));
    }
    if (type_ready) {
        enable(Role::type_goal, Action::type(open_goal->first));
    }
    if (slide_avail) {
        enable(Role::slide_next,
               Action::slide({graph.screen_w() / 2.0, graph.screen_h() / 2.0}, {0.0, -600.0}));
    }
    if (other_widget != nullptr) {
        enable(Role::click_other, Action::click({other_widget->bbox.cx, other_widget->bbox.cy}));
    }
    enable(Role::wait_idle, Action::wait());
    enable(Role::complete, Action::complete());

    // advance the hint cursor by greedy matching against executed history
    if (!facts.hint_plan.empty()) {
        std::size_t cursor = 0;
        for (const std::string& executed : observation.history) {
            if (cursor < facts.hint_plan.size() &&
                executed == serialize_action(facts.hint_plan[cursor])) {
                ++cursor;
            }
        }
        if (cursor < facts.hint_plan.size()) {
            const Action& hinted = facts.hint_plan[cursor];
            for (int r = 0; r < kRoleCount; ++r) {
                if (role_available(ctx.mask, r) && ctx.actions[r] == hinted) {
                    ctx.hint_role = r;
                    break;
                }
            }
        }
    }
    return ctx;
}

ToyPolicy::ToyPolicy(double hint_adherence) : hint_adherence_(hint_adherence) {
    set_hint_adherence(hint_adherence);
}

void ToyPolicy::set_hint_adherence(double w) {
    if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
        raise(ErrKind::domain, kOrigin, "hint_adherence must lie in [0, 1]");
    }
    hint_adherence_ = w;
}

std::array<double, kRoleCount> ToyPolicy::base_probs(const std::string& key,
                                                     std::uint32_t mask) const {
    std::array<double, kRoleCount> out{};
    GradRow logits{};
    auto it = table_.find(key);
    if (it != table_.end()) {
        logits = it->second;
    }
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < kRoleCount; ++r) {
        if (role_available(mask, r)) {
            max_logit = std::max(max_logit, logits[r]);
        }
    }
    if (!std::isfinite(max_logit)) {
        raise(ErrKind::domain, kOrigin, "no available roles in mask");
    }
    double z = 0.0;
    for (int r = 0; r < kRoleCount; ++r) {
        if (role_available(mask, r)) {
            out[r] = std::exp(logits[r] - max_logit);
            z += out[r];
        }
    }
    for (int r = 0; r < kRoleCount; ++r) {
        out[r] /= z;
    }
    return out;
}

std::array<double, kRoleCount> ToyPolicy::probs(const std::string& key, std::uint32_t mask,
                                                int hint_role) const {
    std::array<double, kRoleCount> p = base_probs(key, mask);
    if (hint_role >= 0 && role_available(mask, hint_role) && hint_adherence_ > 0.0) {
        for (int r = 0; r < kRoleCount; ++r) {
            p[r] *= 1.0 - hint_adherence_;
        }
        p[hint_role] += hint_adherence_;
    }
    return p;
}

double ToyPolicy::logp(const std::string& key, std::uint32_t mask, int hint_role,
                       int role) const {
    std::array<double, kRoleCount> p = probs(key, mask, hint_role);
    if (!role_available(mask, role) || p[role] <= 0.0) {
        raise(ErrKind::domain, kOrigin, "role has zero probability");
    }
    return std::log(p[role]);
}

GradRow ToyPolicy::logp_grad(const PolicyToken& token) const {
    std::array<double, kRoleCount> base = base_probs(token.state_key, token.mask);
    GradRow grad{};
    bool hinted = token.hint_role >= 0 && role_available(token.mask, token.hint_role) &&
                  hint_adherence_ > 0.0;
    double pi = base[token.role];
    double mix = 1.0;
    if (hinted) {
        pi = (1.0 - hint_adherence_) * base[token.role] +
             (token.role == token.hint_role ? hint_adherence_ : 0.0);
        mix = 1.0 - hint_adherence_;
    }
    if (pi <= 0.0) {
        raise(ErrKind::domain, kOrigin, "token has zero probability under current parameters");
    }
    for (int r = 0; r < kRoleCount; ++r) {
        if (!role_available(token.mask, r)) continue;
        double indicator = r == token.role ? 1.0 : 0.0;
        grad[r] = mix * base[token.role] * (indicator - base[r]) / pi;
    }
    return grad;
}

int ToyPolicy::sample(const std::string& key, std::uint32_t mask, int hint_role,
                      std::mt19937_64& rng) const {
    std::array<double, kRoleCount> p = probs(key, mask, hint_role);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    double u = uniform(rng);
    double acc = 0.0;
    int last = -1;
    for (int r = 0; r < kRoleCount; ++r) {
        if (p[r] <= 0.0) continue;
        acc += p[r];
        last = r;
        if (u < acc) {
            return r;
        }
    }
    return last;  // rounding residue lands on the final supported role
}

int ToyPolicy::argmax_role(const std::string& key, std::uint32_t mask) const {
    std::array<double, kRoleCount> p = base_probs(key, mask);
    int best = -1;
    for (int r = 0; r < kRoleCount; ++r) {
        if (!role_available(mask, r)) continue;
        if (best < 0 || p[r] > p[best]) {
            best = r;
        }
    }
    return best;
}

double ToyPolicy::state_entropy(const std::string& key, std::uint32_t mask) const {
    std::array<double, kRoleCount> p = base_probs(key, mask);
    double h = 0.0;
    for (int r = 0; r < kRoleCount; ++r) {
        if (p[r] > 0.0) {
            h -= p[r] * std::log(p[r]);
        }
    }
    return h;
}

void ToyPolicy::apply_gradient(const GradientTable& gradient, double scale) {
    for (const auto& [key, row] : gradient) {
        GradRow& target = table_[key];
        for (int r = 0; r < kRoleCount; ++r) {
            target[r] += scale * row[r];
        }
    }
}

double ToyPolicy::logit(const std::string& key, int role) const {
    auto it = table_.find(key);
    if (it == table_.end()) return 0.0;
    return it->second[role];
}

void ToyPolicy::set_logit(const std::string& key, int role, double value) {
    table_[key][role] = value;
}

void ToyPolicy::save(const std::string& path) const {
    nlohmann::json j;
    j["hint_adherence"] = hint_adherence_;
    j["table"] = nlohmann::json::object();
    for (const auto& [key, row] : table_) {
        j["table"][key] = row;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    out << j.dump(2) << "\n";
}

ToyPolicy ToyPolicy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, kOrigin, std::string("invalid json: ") + e.what());
    }
    try {
        ToyPolicy policy(j.at("hint_adherence").get<double>());
        for (const auto& [key, row] : j.at("table").items()) {
            GradRow r = row.get<GradRow>();
            policy.table_[key] = r;
        }
        return policy;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::schema, kOrigin, std::string("bad policy field: ") + e.what());
    }
}

ActResult ToyActor::act(const Observation& observation, std::mt19937_64& rng) {
    StateContext ctx = analyze_observation(observation, *graph_);
    int role = policy_->sample(ctx.key, ctx.mask, ctx.hint_role, rng);
    double lp = policy_->logp(ctx.key, ctx.mask, ctx.hint_role, role);
    if (sink_ != nullptr) {
        sink_->push_back({ctx.key, ctx.mask, role, ctx.hint_role, lp});
    }
    return {ctx.actions[role], {lp}};
}

ActResult ArgmaxActor::act(const Observation& observation, std::mt19937_64& rng) {
    (void)rng;
    StateContext ctx = analyze_observation(observation, *graph_);
    int role = policy_->argmax_role(ctx.key, ctx.mask);
    double lp = policy_->logp(ctx.key, ctx.mask, -1, role);
    return {ctx.actions[role], {lp}};
}

}  // namespace guirl
