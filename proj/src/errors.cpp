#include "errors.hpp"

namespace vvo {

const char* error_code_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument:      return "InvalidArgument";
    case ErrorCode::CycleDetected:        return "CycleDetected";
    case ErrorCode::NonPositiveReactance: return "NonPositiveReactance";
    case ErrorCode::DisconnectedBus:      return "DisconnectedBus";
    case ErrorCode::DimensionMismatch:    return "DimensionMismatch";
    case ErrorCode::NonPositiveC:         return "NonPositiveC";
    case ErrorCode::NotConverged:         return "NotConverged";
    case ErrorCode::MaxIterations:        return "MaxIterations";
    case ErrorCode::SingularSystem:       return "SingularSystem";
    case ErrorCode::Infeasible:           return "Infeasible";
    case ErrorCode::SolverStalled:        return "SolverStalled";
    case ErrorCode::Diverged:             return "Diverged";
    case ErrorCode::ParseError:           return "ParseError";
    case ErrorCode::IoError:              return "IoError";
    }
    return "Unknown";
}

} // namespace vvo
