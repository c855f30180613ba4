#pragma once

#include <stdexcept>
#include <string>

namespace ocpc {

enum class ErrorCode {
    invalid_band,
    missing_band,
    invalid_input,
    domain,
    tolerance,
    complexity,
    invariant_violation,
    unsupported,
};

inline const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::invalid_band: return "invalid-band";
    case ErrorCode::missing_band: return "missing-band";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::domain: return "domain";
    case ErrorCode::tolerance: return "tolerance";
    case ErrorCode::complexity: return "complexity";
    case ErrorCode::invariant_violation: return "invariant-violation";
    case ErrorCode::unsupported: return "unsupported";
    }
    return "unknown";
}

/// Every failure raised by the library. The message names the offending parameter.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool ok, ErrorCode code, const std::string& what)
{
    if (!ok) throw Error(code, what);
}

} // namespace detail
} // namespace ocpc
