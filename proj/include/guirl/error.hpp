#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace guirl {

/// Error taxonomy shared across the library. The C API maps these onto
/// guirl_status codes; the CLI maps them onto exit codes.
enum class ErrKind {
    parse,
    domain,
    io,
    config,
    judge_unavailable,
    judge_malformed,
    timeout,
    length_mismatch,
    missing_bounds,
    record_rejected,
    schema,
    unknown_step_id,
    verifier,
    step_cap,
    divergence,
    generation,
    threshold,
    usage,
    internal,
};

std::string_view to_string(ErrKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrKind kind, std::string origin, const std::string& message,
          std::optional<std::size_t> byte_offset = std::nullopt)
        : std::runtime_error(format(kind, origin, message, byte_offset)),
          kind_(kind),
          origin_(std::move(origin)),
          byte_offset_(byte_offset) {}

    ErrKind kind() const noexcept { return kind_; }
    const std::string& origin() const noexcept { return origin_; }
    std::optional<std::size_t> byte_offset() const noexcept { return byte_offset_; }

private:
    static std::string format(ErrKind kind, const std::string& origin,
                              const std::string& message,
                              std::optional<std::size_t> byte_offset);

    ErrKind kind_;
    std::string origin_;
    std::optional<std::size_t> byte_offset_;
};

[[noreturn]] inline void raise(ErrKind kind, std::string origin, const std::string& message,
                               std::optional<std::size_t> byte_offset = std::nullopt) {
    throw Error(kind, std::move(origin), message, byte_offset);
}

}  // namespace guirl
