#include "guirl/diag.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace guirl {

namespace {

constexpr const char* kOrigin = "diagnostics";
constexpr const char* kHeader =
    "step,rollout_log_ppl,ppl_ratio,k3_kl,chi2_token,chi2_seq,entropy,clip_fraction";

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& field, const std::string& origin) {
    char* end = nullptr;
    double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0') {
        raise(ErrKind::parse, origin, "bad numeric field '" + field + "'");
    }
    return v;
}

}  // namespace

void DiagRecord::validate() const {
    const double values[] = {rollout_log_ppl, ppl_ratio, k3_kl,
                             chi2_token,      chi2_seq,  entropy,
                             clip_fraction};
    for (double v : values) {
        if (!std::isfinite(v)) {
            raise(ErrKind::record_rejected, kOrigin, "record contains a non-finite field");
        }
    }
    if (ppl_ratio <= 0.0) {
        raise(ErrKind::record_rejected, kOrigin, "ppl_ratio must be > 0");
    }
    if (k3_kl < 0.0 || chi2_token < 0.0 || chi2_seq < 0.0) {
        raise(ErrKind::record_rejected, kOrigin, "kl and chi2 fields must be >= 0");
    }
    if (clip_fraction < 0.0 || clip_fraction > 1.0) {
        raise(ErrKind::record_rejected, kOrigin, "clip_fraction must lie in [0, 1]");
    }
}

double rollout_log_ppl(const std::vector<double>& logprobs) {
    if (logprobs.empty()) {
        raise(ErrKind::domain, kOrigin, "rollout_log_ppl needs at least one token");
    }
    double sum = 0.0;
    for (double lp : logprobs) {
        if (!std::isfinite(lp)) {
            raise(ErrKind::domain, kOrigin, "logprobs must be finite");
        }
        sum += -lp;
    }
    return sum / static_cast<double>(logprobs.size());
}

double ppl_ratio(const std::vector<double>& logp_train, const std::vector<double>& logp_rollout) {
    if (logp_train.size() != logp_rollout.size()) {
        raise(ErrKind::length_mismatch, kOrigin, "ppl_ratio input lengths differ");
    }
    if (logp_train.empty()) {
        raise(ErrKind::domain, kOrigin, "ppl_ratio needs at least one token");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < logp_train.size(); ++i) {
        if (!std::isfinite(logp_train[i]) || !std::isfinite(logp_rollout[i])) {
            raise(ErrKind::domain, kOrigin, "logprobs must be finite");
        }
        sum += logp_rollout[i] - logp_train[i];
    }
    return std::exp(sum / static_cast<double>(logp_train.size()));
}

double k3_kl(const std::vector<double>& deltas) {
    if (deltas.empty()) {
        raise(ErrKind::domain, kOrigin, "k3_kl needs at least one delta");
    }
    double sum = 0.0;
    for (double d : deltas) {
        if (!std::isfinite(d)) {
            raise(ErrKind::domain, kOrigin, "deltas must be finite");
        }
        sum += std::exp(d) - d - 1.0;
    }
    return sum / static_cast<double>(deltas.size());
}

double chi2(const std::vector<double>& ratios, Chi2Granularity granularity,
            const std::vector<std::pair<std::size_t, std::size_t>>* seq_bounds, double trunc) {
    if (ratios.empty()) {
        raise(ErrKind::domain, kOrigin, "chi2 needs at least one ratio");
    }
    for (double r : ratios) {
        if (!std::isfinite(r) || r <= 0.0) {
            raise(ErrKind::domain, kOrigin, "ratios must be finite and > 0");
        }
    }
    if (granularity == Chi2Granularity::token) {
        double sum = 0.0;
        for (double r : ratios) {
            sum += (r - 1.0) * (r - 1.0);
        }
        return sum / static_cast<double>(ratios.size());
    }
    if (seq_bounds == nullptr || seq_bounds->empty()) {
        raise(ErrKind::missing_bounds, kOrigin, "sequence chi2 needs sequence bounds");
    }
    if (!std::isfinite(trunc) || trunc <= 0.0) {
        raise(ErrKind::domain, kOrigin, "trunc must be > 0");
    }
    double sum = 0.0;
    for (const auto& [begin, end] : *seq_bounds) {
        if (begin >= end || end > ratios.size()) {
            raise(ErrKind::missing_bounds, kOrigin, "sequence bounds out of range");
        }
        double prod = 1.0;
        for (std::size_t i = begin; i < end; ++i) {
            prod *= ratios[i];
        }
        double w = std::min(prod, trunc);
        sum += (w - 1.0) * (w - 1.0);
    }
    return sum / static_cast<double>(seq_bounds->size());
}

DiagCsvSink::DiagCsvSink(std::string path, bool truncate) : path_(std::move(path)) {
    if (truncate) {
        std::ofstream out(path_, std::ios::trunc);
        if (!out) {
            raise(ErrKind::io, kOrigin, "cannot open '" + path_ + "' for writing");
        }
    }
}

const char* DiagCsvSink::header() {
    return kHeader;
}

std::size_t DiagCsvSink::emit(const std::vector<DiagRecord>& records) {
    for (const DiagRecord& r : records) {
        r.validate();
    }
    bool need_header = true;
    {
        std::ifstream probe(path_);
        if (probe) {
            probe.seekg(0, std::ios::end);
            need_header = probe.tellg() == std::streampos(0);
        }
    }
    std::ofstream out(path_, std::ios::app);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path_ + "' for appending");
    }
    if (need_header) {
        out << kHeader << "\n";
    }
    for (const DiagRecord& r : records) {
        out << r.step << "," << format_double(r.rollout_log_ppl) << ","
            << format_double(r.ppl_ratio) << "," << format_double(r.k3_kl) << ","
            << format_double(r.chi2_token) << "," << format_double(r.chi2_seq) << ","
            << format_double(r.entropy) << "," << format_double(r.clip_fraction) << "\n";
    }
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path_ + "'");
    }
    return records.size();
}

std::size_t emit(const std::vector<DiagRecord>& records, DiagCsvSink& sink) {
    return sink.emit(records);
}

std::vector<DiagRecord> parse_diagnostics(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        raise(ErrKind::parse, path, "missing header row");
    }
    if (line != kHeader) {
        raise(ErrKind::parse, path, "unexpected header row");
    }
    std::vector<DiagRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::ostringstream origin;
        origin << path << ":" << line_no;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (fields.size() != 8) {
            raise(ErrKind::parse, origin.str(), "expected 8 fields");
        }
        DiagRecord r;
        r.step = static_cast<std::int64_t>(parse_double(fields[0], origin.str()));
        r.rollout_log_ppl = parse_double(fields[1], origin.str());
        r.ppl_ratio = parse_double(fields[2], origin.str());
        r.k3_kl = parse_double(fields[3], origin.str());
        r.chi2_token = parse_double(fields[4], origin.str());
        r.chi2_seq = parse_double(fields[5], origin.str());
        r.entropy = parse_double(fields[6], origin.str());
        r.clip_fraction = parse_double(fields[7], origin.str());
        out.push_back(r);
    }
    return out;
}

}  // namespace guirl
