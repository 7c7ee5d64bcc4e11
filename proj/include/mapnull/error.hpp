#pragma once

#include <stdexcept>
#include <string>

namespace mapnull {

enum class ErrorKind {
    input,               // malformed or non-finite input data
    parameter,           // invalid parameter value
    metric,              // distance metric undefined for the input
    dimension,           // requested dimensionality not available
    degenerate_covariance,
    degenerate_filter,
    degenerate_null,     // zero spread in a null distribution
    undefined_modularity,
    precision,           // Monte Carlo sample too small
    config,              // config/schema validation
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::metric: return "metric";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::degenerate_covariance: return "degenerate_covariance";
    case ErrorKind::degenerate_filter: return "degenerate_filter";
    case ErrorKind::degenerate_null: return "degenerate_null";
    case ErrorKind::undefined_modularity: return "undefined_modularity";
    case ErrorKind::precision: return "precision";
    case ErrorKind::config: return "config";
    }
    return "unknown";
}

/// Base exception for every failure raised by the library. Carries a
/// machine-readable kind and, once known, the pipeline stage it came from.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::string stage = {})
        : std::runtime_error(stage.empty() ? message : stage + ": " + message)
        , kind_(kind)
        , stage_(std::move(stage))
        , message_(message)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }
    /// The message without the stage prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string stage_;
    std::string message_;
};

/// Re-throws `e` with a stage prefix; keeps the kind.
[[noreturn]] inline void rethrow_with_stage(const Error& e, const std::string& stage)
{
    throw Error(e.kind(), e.message(), e.stage().empty() ? stage : stage + ": " + e.stage());
}

inline void require(bool cond, ErrorKind kind, const std::string& msg)
{
    if (!cond)
        throw Error(kind, msg);
}

} // namespace mapnull
