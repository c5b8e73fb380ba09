#pragma once

#include <stdexcept>
#include <string>

namespace ukdh {

enum class ErrorCode {
    bad_magic,
    bad_version,
    truncated_payload,
    dimension_mismatch,
    non_finite_value,
    io_failure,
    invalid_argument,
    divergence,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::bad_magic: return "bad_magic";
        case ErrorCode::bad_version: return "bad_version";
        case ErrorCode::truncated_payload: return "truncated_payload";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::non_finite_value: return "non_finite_value";
        case ErrorCode::io_failure: return "io_failure";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::divergence: return "divergence";
    }
    return "unknown";
}

}  // namespace ukdh
