#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsplat {

enum class ErrorCode {
    invalid_input,
    degenerate_depth,
    degenerate_covariance,
    schema,
    bounds,
    unsupported_format,
    parse,
    missing_input,
    invalid_rig,
    invalid_depth,
    contract_violation,
    protocol,
    encode,
    io,
};

std::string_view to_string(ErrorCode code);

// Every failure the library reports on purpose is an Error. Anything else
// escaping a public call is a bug.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::degenerate_depth: return "degenerate depth";
    case ErrorCode::degenerate_covariance: return "degenerate covariance";
    case ErrorCode::schema: return "schema error";
    case ErrorCode::bounds: return "bounds error";
    case ErrorCode::unsupported_format: return "unsupported format";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::missing_input: return "missing input";
    case ErrorCode::invalid_rig: return "invalid rig";
    case ErrorCode::invalid_depth: return "invalid depth";
    case ErrorCode::contract_violation: return "contract violation";
    case ErrorCode::protocol: return "protocol error";
    case ErrorCode::encode: return "encode error";
    case ErrorCode::io: return "io error";
    }
    return "error";
}

}  // namespace hsplat
