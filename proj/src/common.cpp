#include "fibredist/common.hpp"

namespace fibredist {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::io_error: return "io_error";
        case ErrorCode::missing_columns: return "missing_columns";
        case ErrorCode::unknown_polymer: return "unknown_polymer";
        case ErrorCode::insufficient_studies: return "insufficient_studies";
        case ErrorCode::degenerate_data: return "degenerate_data";
        case ErrorCode::not_converged: return "not_converged";
        case ErrorCode::missing_feature: return "missing_feature";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::internal: return "internal";
    }
    return "internal";
}

}  // namespace fibredist
