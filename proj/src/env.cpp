#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "guirl/env.hpp"
#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "sim_env";
constexpr double kSlideThreshold = 100.0;

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string quote_verifier_text(const std::string& s) {
    std::string out = "\"";
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

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(' ');
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(' ');
    return s.substr(b, e - b + 1);
}

const char* kTypeWords[] = {"alpha", "bravo", "cedar", "delta",
                            "ember", "falcon", "garnet", "harbor"};

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::atomic: return "atomic";
        case Difficulty::composite: return "composite";
        case Difficulty::conditional: return "conditional";
    }
    return "atomic";
}

std::optional<Difficulty> difficulty_from(std::string_view name) {
    if (name == "atomic") return Difficulty::atomic;
    if (name == "composite") return Difficulty::composite;
    if (name == "conditional") return Difficulty::conditional;
    return std::nullopt;
}

std::string VerifierProgram::to_text() const {
    std::string out;
    for (std::size_t i = 0; i < conjuncts.size(); ++i) {
        if (i > 0) out += " && ";
        const Predicate& p = conjuncts[i];
        switch (p.kind) {
            case Predicate::Kind::clicked:
                out += "clicked(" + p.subject + ")";
                break;
            case Predicate::Kind::typed:
                out += "typed(" + p.subject + "," + quote_verifier_text(p.text) + ")";
                break;
            case Predicate::Kind::on_screen:
                out += "on_screen(" + p.subject + ")";
                break;
        }
    }
    return out;
}

VerifierProgram VerifierProgram::parse(const std::string& text) {
    VerifierProgram program;
    if (trim(text).empty()) {
        raise(ErrKind::verifier, kOrigin, "verifier program is empty");
    }
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find("&&", pos);
        std::string chunk =
            trim(next == std::string::npos ? text.substr(pos) : text.substr(pos, next - pos));
        std::size_t open = chunk.find('(');
        if (open == std::string::npos || chunk.back() != ')') {
            raise(ErrKind::verifier, kOrigin, "malformed predicate '" + chunk + "'");
        }
        std::string name = trim(chunk.substr(0, open));
        std::string args = chunk.substr(open + 1, chunk.size() - open - 2);
        Predicate p;
        if (name == "clicked" || name == "on_screen") {
            p.kind = name == "clicked" ? Predicate::Kind::clicked : Predicate::Kind::on_screen;
            p.subject = trim(args);
            if (p.subject.empty()) {
                raise(ErrKind::verifier, kOrigin, name + " needs a subject");
            }
        } else if (name == "typed") {
            p.kind = Predicate::Kind::typed;
            std::size_t comma = args.find(',');
            if (comma == std::string::npos) {
                raise(ErrKind::verifier, kOrigin, "typed needs a field and a string");
            }
            p.subject = trim(args.substr(0, comma));
            std::string rest = trim(args.substr(comma + 1));
            if (rest.size() < 2 || rest.front() != '"' || rest.back() != '"') {
                raise(ErrKind::verifier, kOrigin, "typed needs a quoted string");
            }
            std::string body = rest.substr(1, rest.size() - 2);
            std::string decoded;
            for (std::size_t i = 0; i < body.size(); ++i) {
                if (body[i] == '\\') {
                    if (i + 1 >= body.size()) {
                        raise(ErrKind::verifier, kOrigin, "dangling escape in typed string");
                    }
                    char e = body[++i];
                    if (e == '"') decoded.push_back('"');
                    else if (e == '\\') decoded.push_back('\\');
                    else if (e == 'n') decoded.push_back('\n');
                    else if (e == 't') decoded.push_back('\t');
                    else raise(ErrKind::verifier, kOrigin, "unknown escape in typed string");
                } else {
                    decoded.push_back(body[i]);
                }
            }
            p.text = decoded;
        } else {
            raise(ErrKind::verifier, kOrigin, "unknown predicate '" + name + "'");
        }
        program.conjuncts.push_back(std::move(p));
        if (next == std::string::npos) break;
        pos = next + 2;
    }
    return program;
}

std::string task_to_json_line(const TaskSpec& task) {
    nlohmann::json j;
    j["id"] = task.id;
    j["instruction"] = task.instruction;
    j["verifier"] = task.verifier.to_text();
    j["gt_plan"] = nlohmann::json::array();
    for (const Action& a : task.gt_plan) {
        j["gt_plan"].push_back(serialize_action(a));
    }
    j["difficulty"] = std::string(to_string(task.difficulty));
    return j.dump();
}

TaskSpec task_from_json_line(const std::string& line, const std::string& origin) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, origin, std::string("invalid json: ") + e.what());
    }
    TaskSpec t;
    try {
        t.id = j.at("id").get<std::string>();
        t.instruction = j.at("instruction").get<std::string>();
        t.verifier = VerifierProgram::parse(j.at("verifier").get<std::string>());
        for (const auto& ja : j.at("gt_plan")) {
            t.gt_plan.push_back(parse_action(ja.get<std::string>()));
        }
        std::string d = j.at("difficulty").get<std::string>();
        std::optional<Difficulty> diff = difficulty_from(d);
        if (!diff) {
            raise(ErrKind::schema, origin, "unknown difficulty '" + d + "'");
        }
        t.difficulty = *diff;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::schema, origin, std::string("bad task field: ") + e.what());
    }
    return t;
}

std::vector<TaskSpec> read_tasks(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    std::vector<TaskSpec> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::ostringstream origin;
        origin << path << ":" << line_no;
        out.push_back(task_from_json_line(line, origin.str()));
    }
    return out;
}

void write_tasks(const std::string& path, const std::vector<TaskSpec>& tasks) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    for (const TaskSpec& t : tasks) {
        out << task_to_json_line(t) << "\n";
    }
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path + "'");
    }
}

SimEnv::SimEnv(AppGraph graph, int step_cap) : graph_(std::move(graph)), step_cap_(step_cap) {
    if (step_cap_ < 1) {
        raise(ErrKind::domain, kOrigin, "step cap must be >= 1");
    }
}

EnvState SimEnv::initial_state() const {
    EnvState s;
    s.screen = graph_.start_screen();
    return s;
}

EnvState SimEnv::apply(const EnvState& state, const Action& action) const {
    if (state.done) {
        raise(ErrKind::domain, kOrigin, "episode is already done");
    }
    EnvState next = state;
    next.step_count += 1;
    const Screen& screen = graph_.screen(state.screen);
    switch (action.kind()) {
        case ActionKind::awake: {
            const App* app = graph_.find_app(action.text());
            if (app == nullptr) {
                app = graph_.find_app_by_name(action.text());
            }
            if (app != nullptr) {
                next.screen = app->root_screen;
                next.page = 0;
                next.focused_field.clear();
            }
            break;
        }
        case ActionKind::click:
        case ActionKind::longpress: {
            const Widget* hit = nullptr;
            for (const Widget& w : screen.widgets) {
                if (w.page == state.page && w.bbox.contains(action.point())) {
                    hit = &w;
                    break;
                }
            }
            if (hit == nullptr) {
                break;
            }
            if (action.kind() == ActionKind::longpress) {
                next.longpressed.push_back(hit->id);
                break;
            }
            next.clicked.push_back(hit->id);
            if (hit->kind == WidgetKind::textfield) {
                next.focused_field = hit->id;
            } else {
                next.focused_field.clear();
            }
            if (!hit->on_click.empty()) {
                next.screen = hit->on_click;
                next.page = 0;
                next.focused_field.clear();
            }
            break;
        }
        case ActionKind::type: {
            if (!next.focused_field.empty()) {
                next.field_contents[next.focused_field] = action.text();
            }
            break;
        }
        case ActionKind::slide: {
            if (screen.page_count > 1) {
                double dy = action.gesture().v.dy;
                if (dy <= -kSlideThreshold) {
                    next.page = std::min(state.page + 1, screen.page_count - 1);
                } else if (dy >= kSlideThreshold) {
                    next.page = std::max(state.page - 1, 0);
                }
            }
            break;
        }
        case ActionKind::info:
            next.info_answers.push_back(action.text());
            break;
        case ActionKind::wait:
            break;
        case ActionKind::complete:
            next.done = true;
            break;
    }
    return next;
}

Observation SimEnv::observe(const EnvState& state, const TaskSpec& task,
                            const std::vector<std::string>& history) const {
    const Screen& screen = graph_.screen(state.screen);
    Observation obs;
    obs.instruction = task.instruction;
    obs.screen_id = screen.id;
    obs.page = state.page;
    obs.page_count = screen.page_count;
    obs.focused_field = state.focused_field;
    obs.field_contents = state.field_contents;
    obs.history = history;
    obs.step_count = state.step_count;
    for (const Widget& w : screen.widgets) {
        if (w.page == state.page) {
            obs.visible_widgets.push_back(w);
        }
    }
    for (const std::string& id : state.clicked) {
        const Widget* w = graph_.find_widget(id);
        obs.clicked_texts.push_back(w != nullptr ? w->text : id);
    }

    std::ostringstream render;
    render << "screen=" << screen.id << " name=" << screen.name << " page=" << state.page << "/"
           << screen.page_count << "\n";
    render << "focus=" << (state.focused_field.empty() ? "-" : state.focused_field) << "\n";
    for (const Widget& w : obs.visible_widgets) {
        char box[96];
        std::snprintf(box, sizeof(box), "%.0f,%.0f,%.0f,%.0f", w.bbox.cx, w.bbox.cy, w.bbox.w,
                      w.bbox.h);
        render << "w id=" << w.id << " kind=" << to_string(w.kind) << " text='" << w.text
               << "' box=" << box;
        if (!w.on_click.empty()) {
            render << " -> " << w.on_click;
        }
        render << "\n";
    }
    for (const auto& [field, value] : state.field_contents) {
        render << "field " << field << "='" << value << "'\n";
    }
    render << "clicked:";
    for (const std::string& id : state.clicked) {
        render << " " << id;
    }
    render << "\n";
    obs.render = render.str();

    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "obs-%016llx",
                  static_cast<unsigned long long>(fnv1a(obs.render)));
    obs.observation_id = id_buf;
    return obs;
}

bool SimEnv::verify(const EnvState& final_state, const VerifierProgram& program) const {
    for (const Predicate& p : program.conjuncts) {
        switch (p.kind) {
            case Predicate::Kind::clicked: {
                bool hit = std::find(final_state.clicked.begin(), final_state.clicked.end(),
                                     p.subject) != final_state.clicked.end();
                if (!hit) return false;
                break;
            }
            case Predicate::Kind::typed: {
                auto it = final_state.field_contents.find(p.subject);
                if (it == final_state.field_contents.end() || it->second != p.text) return false;
                break;
            }
            case Predicate::Kind::on_screen:
                if (final_state.screen != p.subject) return false;
                break;
        }
    }
    return true;
}

Outcome SimEnv::verify_outcome(const EnvState& final_state, const TaskSpec& task) const {
    return verify(final_state, task.verifier) ? Outcome::success : Outcome::failure;
}

namespace {

Point widget_center(const Widget& w) {
    return {w.bbox.cx, w.bbox.cy};
}

/// Widgets whose text appears exactly once across the whole app, so an
/// instruction can name them unambiguously.
std::vector<const Widget*> unique_text_widgets(const AppGraph& graph, const App& app,
                                               const Screen& screen, int page) {
    std::map<std::string, int> counts;
    for (const Screen& s : graph.screens()) {
        if (s.app != app.id) continue;
        for (const Widget& w : s.widgets) {
            counts[w.text] += 1;
        }
    }
    std::vector<const Widget*> out;
    for (const Widget& w : screen.widgets) {
        if (w.page == page && counts[w.text] == 1) {
            out.push_back(&w);
        }
    }
    return out;
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& items) {
    std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
    return items[d(rng)];
}

}  // namespace

TaskSpec SimEnv::generate_task(std::uint64_t seed, Difficulty difficulty) const {
    std::mt19937_64 rng(mix_seed(seed, 0x6e657261ull + static_cast<std::uint64_t>(difficulty)));
    TaskSpec task;
    char id_buf[48];
    std::snprintf(id_buf, sizeof(id_buf), "task-%s-%016llx", to_string(difficulty).data(),
                  static_cast<unsigned long long>(seed));
    task.id = id_buf;
    task.difficulty = difficulty;

    const App& app = pick(rng, graph_.apps());
    const Screen& root = graph_.screen(app.root_screen);
    Point slide_start{graph_.screen_w() / 2.0, graph_.screen_h() / 2.0};

    switch (difficulty) {
        case Difficulty::atomic: {
            std::vector<const Widget*> targets = unique_text_widgets(graph_, app, root, 0);
            if (targets.empty()) {
                raise(ErrKind::generation, kOrigin, "no atomic targets in app '" + app.id + "'");
            }
            const Widget* target = pick(rng, targets);
            task.instruction = "Open " + app.name + " and click '" + target->text + "'.";
            task.verifier.conjuncts.push_back(
                {Predicate::Kind::clicked, target->id, ""});
            task.gt_plan = {Action::awake(app.id), Action::click(widget_center(*target)),
                            Action::complete()};
            break;
        }
        case Difficulty::composite: {
            struct Option {
                const Widget* nav;
                const Widget* field;
                const Widget* button;
            };
            std::vector<Option> options;
            for (const Widget* nav : unique_text_widgets(graph_, app, root, 0)) {
                if (nav->on_click.empty()) continue;
                const Screen& dest = graph_.screen(nav->on_click);
                std::vector<const Widget*> uniq = unique_text_widgets(graph_, app, dest, 0);
                std::vector<const Widget*> fields, buttons;
                for (const Widget* w : uniq) {
                    if (w->kind == WidgetKind::textfield) fields.push_back(w);
                    if (w->kind == WidgetKind::button) buttons.push_back(w);
                }
                for (const Widget* f : fields) {
                    for (const Widget* btn : buttons) {
                        options.push_back({nav, f, btn});
                    }
                }
            }
            if (options.empty()) {
                raise(ErrKind::generation, kOrigin,
                      "no composite screens in app '" + app.id + "'");
            }
            const Option& opt = pick(rng, options);
            std::uniform_int_distribution<int> word(0, 7);
            std::uniform_int_distribution<int> num(10, 99);
            std::string text = std::string(kTypeWords[word(rng)]) + std::to_string(num(rng));
            task.instruction = "Open " + app.name + ", go to '" + opt.nav->text + "', type \"" +
                               text + "\" into '" + opt.field->text + "', then click '" +
                               opt.button->text + "'.";
            task.verifier.conjuncts.push_back({Predicate::Kind::typed, opt.field->id, text});
            task.verifier.conjuncts.push_back({Predicate::Kind::clicked, opt.button->id, ""});
            task.gt_plan = {Action::awake(app.id),
                            Action::click(widget_center(*opt.nav)),
                            Action::click(widget_center(*opt.field)),
                            Action::type(text),
                            Action::click(widget_center(*opt.button)),
                            Action::complete()};
            break;
        }
        case Difficulty::conditional: {
            struct Option {
                const Widget* nav;
                const Widget* hidden;
            };
            std::vector<Option> options;
            for (const Widget* nav : unique_text_widgets(graph_, app, root, 0)) {
                if (nav->on_click.empty()) continue;
                const Screen& dest = graph_.screen(nav->on_click);
                if (dest.page_count < 2) continue;
                for (int page = 1; page < dest.page_count; ++page) {
                    for (const Widget* w : unique_text_widgets(graph_, app, dest, page)) {
                        options.push_back({nav, w});
                    }
                }
            }
            if (options.empty()) {
                raise(ErrKind::generation, kOrigin,
                      "no conditional screens in app '" + app.id + "'");
            }
            const Option& opt = pick(rng, options);
            task.instruction = "Open " + app.name + ", go to '" + opt.nav->text +
                               "', scroll down and click '" + opt.hidden->text + "'.";
            task.verifier.conjuncts.push_back({Predicate::Kind::clicked, opt.hidden->id, ""});
            task.gt_plan = {Action::awake(app.id), Action::click(widget_center(*opt.nav))};
            for (int page = 0; page < opt.hidden->page; ++page) {
                task.gt_plan.push_back(Action::slide(slide_start, {0.0, -600.0}));
            }
            task.gt_plan.push_back(Action::click(widget_center(*opt.hidden)));
            task.gt_plan.push_back(Action::complete());
            break;
        }
    }
    return task;
}

TaskSpec SimEnv::hint_augment(const TaskSpec& task) const {
    TaskSpec out = task;
    std::string hint = "\n[hint]";
    for (const Action& a : task.gt_plan) {
        hint += " " + serialize_action(a) + " ;";
    }
    if (!task.gt_plan.empty()) {
        hint.pop_back();
        hint.pop_back();
    }
    out.instruction += hint;
    return out;
}

EnvState SimEnv::replay(const TaskSpec& task, const std::vector<Action>& actions) const {
    (void)task;
    EnvState state = initial_state();
    for (const Action& a : actions) {
        if (state.step_count >= step_cap_) {
            raise(ErrKind::step_cap, kOrigin, "replay exceeds the step cap");
        }
        state = apply(state, a);
        if (state.done) break;
    }
    return state;
}

Episode::Episode(const SimEnv& env, TaskSpec task, std::uint64_t seed)
    : env_(&env), task_(std::move(task)), state_(env.initial_state()) {
    (void)seed;  // transitions are seed-free; seeds drive actor sampling
    observation_ = env_->observe(state_, task_, history_);
}

StepResult Episode::step(const Action& action) {
    if (state_.done) {
        raise(ErrKind::domain, kOrigin, "episode is already done");
    }
    if (state_.step_count >= env_->step_cap()) {
        raise(ErrKind::step_cap, kOrigin, "step cap reached");
    }
    state_ = env_->apply(state_, action);
    history_.push_back(serialize_action(action));
    observation_ = env_->observe(state_, task_, history_);
    return {observation_, state_.done};
}

ActResult PlanActor::act(const Observation& observation, std::mt19937_64& rng) {
    (void)observation;
    (void)rng;
    if (next_ < plan_.size()) {
        return {plan_[next_++], {0.0}};
    }
    return {Action::wait(), {0.0}};
}

Trajectory rollout(Actor& actor, const SimEnv& env, const TaskSpec& task, std::uint64_t seed,
                   int max_steps) {
    int cap = env.step_cap();
    if (max_steps > 0) {
        cap = std::min(cap, max_steps);
    }
    Episode episode(env, task, seed);
    std::mt19937_64 rng(mix_seed(seed, 0xac70ull));
    Trajectory trajectory;
    trajectory.task = task.id;
    while (!episode.done() && episode.state().step_count < cap) {
        Step step;
        step.observation_id = episode.observation().observation_id;
        ActResult result = actor.act(episode.observation(), rng);
        step.action = result.action;
        if (!result.token_logprobs.empty()) {
            step.logprobs = result.token_logprobs;
        }
        episode.step(result.action);
        trajectory.steps.push_back(std::move(step));
    }
    trajectory.set_outcome(env.verify_outcome(episode.state(), task));
    return trajectory;
}

}  // namespace guirl
