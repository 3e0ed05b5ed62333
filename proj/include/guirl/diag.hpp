#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "guirl/error.hpp"

namespace guirl {

struct DiagRecord {
    std::int64_t step = 0;
    double rollout_log_ppl = 0.0;
    double ppl_ratio = 1.0;
    double k3_kl = 0.0;
    double chi2_token = 0.0;
    double chi2_seq = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;

    void validate() const;

    bool operator==(const DiagRecord&) const = default;
};

enum class Chi2Granularity : int { token, sequence };

/// Default cap on per-sequence importance-weight products before squaring.
inline constexpr double kSeqWeightTrunc = 5.0;

/// Mean negative log-probability per token.
double rollout_log_ppl(const std::vector<double>& logprobs);

/// exp(mean(logp_rollout - logp_train)); > 1 means the training policy finds
/// the rollout data less likely than the rollout policy did.
double ppl_ratio(const std::vector<double>& logp_train, const std::vector<double>& logp_rollout);

/// Mean of e^d - d - 1 over the given log-ratio deltas.
double k3_kl(const std::vector<double>& deltas);

/// Importance-weight spread. Token granularity: mean((r-1)^2). Sequence
/// granularity: ratios are grouped by the [begin, end) index ranges in
/// seq_bounds, each sequence contributes (min(prod r, trunc) - 1)^2.
double chi2(const std::vector<double>& ratios, Chi2Granularity granularity,
            const std::vector<std::pair<std::size_t, std::size_t>>* seq_bounds, double trunc);

/// Append-only CSV sink with a fixed header written once per file.
class DiagCsvSink {
public:
    explicit DiagCsvSink(std::string path, bool truncate = false);

    const std::string& path() const { return path_; }

    /// Appends one row per record after validation; returns rows written.
    std::size_t emit(const std::vector<DiagRecord>& records);

    static const char* header();

private:
    std::string path_;
};

std::size_t emit(const std::vector<DiagRecord>& records, DiagCsvSink& sink);

std::vector<DiagRecord> parse_diagnostics(const std::string& path);

}  // namespace guirl
