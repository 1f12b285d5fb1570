#pragma once

#include <stdexcept>
#include <string>

namespace synergy {

// Status domains shared by the C API (syn_status) and the CLI exit codes.
enum class ErrorCode {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    Transport = 3,
    Data = 4,
    Parse = 5,
    NotFound = 6,
    Internal = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void throw_error(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace synergy
