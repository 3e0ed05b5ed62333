#include "guirl/error.hpp"

#include <sstream>

namespace guirl {

std::string_view to_string(ErrKind kind) {
    switch (kind) {
        case ErrKind::parse: return "parse";
        case ErrKind::domain: return "domain";
        case ErrKind::io: return "io";
        case ErrKind::config: return "config";
        case ErrKind::judge_unavailable: return "judge_unavailable";
        case ErrKind::judge_malformed: return "judge_malformed";
        case ErrKind::timeout: return "timeout";
        case ErrKind::length_mismatch: return "length_mismatch";
        case ErrKind::missing_bounds: return "missing_bounds";
        case ErrKind::record_rejected: return "record_rejected";
        case ErrKind::schema: return "schema";
        case ErrKind::unknown_step_id: return "unknown_step_id";
        case ErrKind::verifier: return "verifier";
        case ErrKind::step_cap: return "step_cap";
        case ErrKind::divergence: return "divergence";
        case ErrKind::generation: return "generation";
        case ErrKind::threshold: return "threshold";
        case ErrKind::usage: return "usage";
        case ErrKind::internal: return "internal";
    }
    return "internal";
}

std::string Error::format(ErrKind kind, const std::string& origin, const std::string& message,
                          std::optional<std::size_t> byte_offset) {
    std::ostringstream out;
    out << origin << ": [" << to_string(kind) << "] " << message;
    if (byte_offset) {
        out << " (byte " << *byte_offset << ")";
    }
    return out.str();
}

}  // namespace guirl
