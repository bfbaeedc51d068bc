#pragma once

#include <stdexcept>
#include <string>

namespace vvo {

enum class ErrorCode {
    InvalidArgument,
    CycleDetected,
    NonPositiveReactance,
    DisconnectedBus,
    DimensionMismatch,
    NonPositiveC,
    NotConverged,
    MaxIterations,
    SingularSystem,
    Infeasible,
    SolverStalled,
    Diverged,
    ParseError,
    IoError,
};

const char* error_code_name(ErrorCode code);

/// Exception carrying a machine-readable code; the C boundary maps it to a status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace vvo
