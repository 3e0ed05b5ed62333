#include "guirl/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "guirl/reward.hpp"
#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "bench";

bool is_pointer_kind(ActionKind k) {
    return k == ActionKind::click || k == ActionKind::longpress;
}

bool is_text_kind(ActionKind k) {
    return k == ActionKind::type || k == ActionKind::awake || k == ActionKind::info;
}

[[noreturn]] void schema_fail(const std::string& origin, const std::string& step_id,
                              const std::string& field, const std::string& message) {
    std::string where = step_id.empty() ? std::string("(no step_id)") : "step '" + step_id + "'";
    raise(ErrKind::schema, origin, where + ", field '" + field + "': " + message);
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                const std::string& origin, const std::string& step_id) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (allowed.find(it.key()) == allowed.end()) {
            schema_fail(origin, step_id, it.key(), "unknown key");
        }
    }
}

std::string fmt1(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

}  // namespace

void Annotation::validate(const std::string& origin) const {
    if (step_id.empty()) {
        schema_fail(origin, step_id, "step_id", "must be non-empty");
    }
    bool vector_set = vector.dx != 0.0 || vector.dy != 0.0;
    if (is_pointer_kind(gt_kind)) {
        if (regions.empty()) {
            schema_fail(origin, step_id, "regions", "pointer kinds need at least one region");
        }
        for (const BBox& r : regions) {
            if (!std::isfinite(r.cx) || !std::isfinite(r.cy) || !std::isfinite(r.w) ||
                !std::isfinite(r.h) || r.w <= 0.0 || r.h <= 0.0) {
                schema_fail(origin, step_id, "regions", "regions need finite positive extent");
            }
        }
    } else if (!regions.empty()) {
        schema_fail(origin, step_id, "regions",
                    std::string("not applicable to kind ") + std::string(to_string(gt_kind)));
    }
    if (gt_kind == ActionKind::slide) {
        if (!std::isfinite(vector.dx) || !std::isfinite(vector.dy) || !vector_set) {
            schema_fail(origin, step_id, "vector", "slide needs a finite non-zero vector");
        }
    } else if (vector_set) {
        schema_fail(origin, step_id, "vector",
                    std::string("not applicable to kind ") + std::string(to_string(gt_kind)));
    }
    if (is_text_kind(gt_kind)) {
        if (refs.empty()) {
            schema_fail(origin, step_id, "refs", "text kinds need at least one reference");
        }
        for (const std::string& r : refs) {
            if (r.empty()) {
                schema_fail(origin, step_id, "refs", "references must be non-empty");
            }
        }
    } else if (!refs.empty()) {
        schema_fail(origin, step_id, "refs",
                    std::string("not applicable to kind ") + std::string(to_string(gt_kind)));
    }
}

std::string annotations_to_json(const std::vector<Annotation>& annotations) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Annotation& a : annotations) {
        nlohmann::json j;
        j["step_id"] = a.step_id;
        j["task"] = a.task;
        j["gt_kind"] = std::string(to_string(a.gt_kind));
        if (is_pointer_kind(a.gt_kind)) {
            nlohmann::json regions = nlohmann::json::array();
            for (const BBox& r : a.regions) {
                regions.push_back({{"cx", r.cx}, {"cy", r.cy}, {"w", r.w}, {"h", r.h}});
            }
            j["regions"] = regions;
        }
        if (a.gt_kind == ActionKind::slide) {
            j["vector"] = {{"dx", a.vector.dx}, {"dy", a.vector.dy}};
        }
        if (is_text_kind(a.gt_kind)) {
            j["refs"] = a.refs;
        }
        arr.push_back(std::move(j));
    }
    return arr.dump(2);
}

std::vector<Annotation> annotations_from_json(const std::string& text,
                                              const std::string& origin) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, origin, std::string("invalid json: ") + e.what());
    }
    if (!arr.is_array()) {
        raise(ErrKind::schema, origin, "annotations file must hold a json array");
    }
    std::vector<Annotation> out;
    std::set<std::string> seen;
    for (const nlohmann::json& j : arr) {
        if (!j.is_object()) {
            raise(ErrKind::schema, origin, "annotation entries must be objects");
        }
        std::string step_id = j.contains("step_id") && j["step_id"].is_string()
                                  ? j["step_id"].get<std::string>()
                                  : std::string();
        check_keys(j, {"step_id", "task", "gt_kind", "regions", "vector", "refs"}, origin,
                   step_id);
        Annotation a;
        try {
            a.step_id = j.at("step_id").get<std::string>();
            a.task = j.at("task").get<std::string>();
            std::string kind_name = j.at("gt_kind").get<std::string>();
            std::optional<ActionKind> kind = action_kind_from(kind_name);
            if (!kind) {
                schema_fail(origin, a.step_id, "gt_kind", "unknown kind '" + kind_name + "'");
            }
            a.gt_kind = *kind;
            if (j.contains("regions")) {
                for (const nlohmann::json& jr : j.at("regions")) {
                    check_keys(jr, {"cx", "cy", "w", "h"}, origin, a.step_id);
                    a.regions.push_back({jr.at("cx").get<double>(), jr.at("cy").get<double>(),
                                         jr.at("w").get<double>(), jr.at("h").get<double>()});
                }
            }
            if (j.contains("vector")) {
                check_keys(j.at("vector"), {"dx", "dy"}, origin, a.step_id);
                a.vector = {j.at("vector").at("dx").get<double>(),
                            j.at("vector").at("dy").get<double>()};
            }
            if (j.contains("refs")) {
                a.refs = j.at("refs").get<std::vector<std::string>>();
            }
        } catch (const nlohmann::json::exception& e) {
            schema_fail(origin, step_id, "(json)", e.what());
        }
        a.validate(origin);
        if (!seen.insert(a.step_id).second) {
            schema_fail(origin, a.step_id, "step_id", "duplicate step_id");
        }
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<Annotation> load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return annotations_from_json(buf.str(), path);
}

void save_annotations(const std::string& path, const std::vector<Annotation>& annotations) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    out << annotations_to_json(annotations) << "\n";
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path + "'");
    }
}

std::vector<Prediction> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    std::vector<Prediction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::ostringstream origin;
        origin << path << ":" << line_no;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            raise(ErrKind::parse, origin.str(), std::string("invalid json: ") + e.what());
        }
        if (!j.is_object()) {
            raise(ErrKind::schema, origin.str(), "prediction lines must be objects");
        }
        std::string step_id = j.contains("step_id") && j["step_id"].is_string()
                                  ? j["step_id"].get<std::string>()
                                  : std::string();
        check_keys(j, {"step_id", "action"}, origin.str(), step_id);
        Prediction p;
        try {
            p.step_id = j.at("step_id").get<std::string>();
            p.action = parse_action(j.at("action").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            schema_fail(origin.str(), step_id, "(json)", e.what());
        }
        if (p.step_id.empty()) {
            schema_fail(origin.str(), p.step_id, "step_id", "must be non-empty");
        }
        out.push_back(std::move(p));
    }
    return out;
}

void save_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    for (const Prediction& p : predictions) {
        nlohmann::json j;
        j["step_id"] = p.step_id;
        j["action"] = serialize_action(p.action);
        out << j.dump() << "\n";
    }
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path + "'");
    }
}

namespace {

bool text_hit(const std::string& pred, const std::vector<std::string>& refs, Judge* judge) {
    std::string norm_pred = normalize_text(pred);
    for (const std::string& ref : refs) {
        if (norm_pred == normalize_text(ref)) {
            return true;
        }
    }
    if (judge == nullptr) {
        return false;
    }
    for (const std::string& ref : refs) {
        JudgeRequest req;
        req.rubric = JudgeRubric::content_verify;
        req.prediction = pred;
        req.reference = ref;
        if (judge->score(req).score >= kJudgeHitThreshold) {
            return true;
        }
    }
    return false;
}

}  // namespace

StepScore score_step(const Action& pred, const Annotation& ann, Judge* judge) {
    StepScore s;
    if (pred.kind() != ann.gt_kind) {
        return s;
    }
    s.type_hit = 1;
    switch (ann.gt_kind) {
        case ActionKind::click:
        case ActionKind::longpress: {
            for (const BBox& r : ann.regions) {
                if (r.contains(pred.point())) {
                    s.value_hit = 1;
                    break;
                }
            }
            break;
        }
        case ActionKind::slide:
            s.value_hit = slide_reward(pred.gesture().v, ann.vector) >= kSlideHitThreshold;
            break;
        case ActionKind::type:
        case ActionKind::awake:
        case ActionKind::info:
            s.value_hit = text_hit(pred.text(), ann.refs, judge);
            break;
        case ActionKind::wait:
        case ActionKind::complete:
            s.value_hit = 1;
            break;
    }
    return s;
}

int ScoreReport::total_steps() const {
    int total = 0;
    for (const KindTally& t : per_kind) {
        total += t.n;
    }
    return total;
}

double ScoreReport::micro_avg() const {
    int total = total_steps();
    if (total == 0) {
        return 0.0;
    }
    int hits = 0;
    for (const KindTally& t : per_kind) {
        hits += t.value_hits;
    }
    return 100.0 * hits / total;
}

double ScoreReport::macro_avg() const {
    double sum = 0.0;
    int kinds = 0;
    for (const KindTally& t : per_kind) {
        if (t.n > 0) {
            sum += t.value_acc();
            ++kinds;
        }
    }
    return kinds == 0 ? 0.0 : sum / kinds;
}

namespace {

double type_average(const ScoreReport& report) {
    if (report.macro_average) {
        double sum = 0.0;
        int kinds = 0;
        for (const KindTally& t : report.per_kind) {
            if (t.n > 0) {
                sum += t.type_acc();
                ++kinds;
            }
        }
        return kinds == 0 ? 0.0 : sum / kinds;
    }
    int total = report.total_steps();
    if (total == 0) {
        return 0.0;
    }
    int hits = 0;
    for (const KindTally& t : report.per_kind) {
        hits += t.type_hits;
    }
    return 100.0 * hits / total;
}

}  // namespace

std::string ScoreReport::render_table() const {
    std::ostringstream out;
    auto cell = [&out](const std::string& text, int width) {
        out << std::string(width > static_cast<int>(text.size())
                               ? width - static_cast<int>(text.size())
                               : 1,
                           ' ')
            << text;
    };
    out << "metric   ";
    for (ActionKind k : kReportOrder) {
        cell(std::string(to_string(k)), 11);
    }
    cell("AVG", 11);
    out << "\n";

    out << "n        ";
    for (ActionKind k : kReportOrder) {
        cell(std::to_string(tally(k).n), 11);
    }
    cell(std::to_string(total_steps()), 11);
    out << "\n";

    out << "type     ";
    for (ActionKind k : kReportOrder) {
        cell(fmt1(tally(k).type_acc()), 11);
    }
    cell(fmt1(type_average(*this)), 11);
    out << "\n";

    out << "value    ";
    for (ActionKind k : kReportOrder) {
        cell(fmt1(tally(k).value_acc()), 11);
    }
    cell(fmt1(avg()), 11);
    out << "\n";
    return out.str();
}

std::string ScoreReport::to_csv() const {
    std::ostringstream out;
    out << "metric";
    for (ActionKind k : kReportOrder) {
        out << "," << to_string(k);
    }
    out << ",AVG\n";
    out << "n";
    for (ActionKind k : kReportOrder) {
        out << "," << tally(k).n;
    }
    out << "," << total_steps() << "\n";
    out << "type_acc";
    for (ActionKind k : kReportOrder) {
        out << "," << fmt1(tally(k).type_acc());
    }
    out << "," << fmt1(type_average(*this)) << "\n";
    out << "value_acc";
    for (ActionKind k : kReportOrder) {
        out << "," << fmt1(tally(k).value_acc());
    }
    out << "," << fmt1(avg()) << "\n";
    return out.str();
}

std::string ScoreReport::to_json() const {
    nlohmann::json kinds = nlohmann::json::object();
    for (ActionKind k : kReportOrder) {
        const KindTally& t = tally(k);
        kinds[std::string(to_string(k))] = {
            {"n", t.n}, {"type_acc", t.type_acc()}, {"value_acc", t.value_acc()}};
    }
    nlohmann::json j;
    j["kinds"] = std::move(kinds);
    j["avg"] = avg();
    j["avg_mode"] = macro_average ? "macro" : "micro";
    return j.dump(2);
}

ScoreReport score_benchmark(const std::vector<Prediction>& preds,
                            const std::vector<Annotation>& anns, Judge* judge,
                            bool macro_average) {
    std::map<std::string, const Annotation*> ann_by_id;
    for (const Annotation& a : anns) {
        a.validate(kOrigin);
        if (!ann_by_id.emplace(a.step_id, &a).second) {
            schema_fail(kOrigin, a.step_id, "step_id", "duplicate annotation");
        }
    }
    std::map<std::string, const Action*> pred_by_id;
    for (const Prediction& p : preds) {
        if (ann_by_id.find(p.step_id) == ann_by_id.end()) {
            raise(ErrKind::unknown_step_id, kOrigin,
                  "prediction for unknown step '" + p.step_id + "'");
        }
        if (!pred_by_id.emplace(p.step_id, &p.action).second) {
            schema_fail(kOrigin, p.step_id, "step_id", "duplicate prediction");
        }
    }
    ScoreReport report;
    report.macro_average = macro_average;
    for (const Annotation& a : anns) {
        KindTally& t = report.per_kind[static_cast<std::size_t>(a.gt_kind)];
        ++t.n;
        auto it = pred_by_id.find(a.step_id);
        if (it == pred_by_id.end()) {
            continue;  // missing prediction scores (0,0)
        }
        StepScore s = score_step(*it->second, a, judge);
        t.type_hits += s.type_hit;
        t.value_hits += s.value_hit;
    }
    return report;
}

}  // namespace guirl
