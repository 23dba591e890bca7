#include "confdrift/error.hpp"

namespace confdrift {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::kInvalidArgument: return "invalid_argument";
        case ErrorCode::kInsufficientData: return "insufficient_data";
        case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
        case ErrorCode::kInvalidRecord: return "invalid_record";
        case ErrorCode::kDetectorFinished: return "detector_finished";
        case ErrorCode::kCalibrationExhausted: return "calibration_exhausted";
        case ErrorCode::kMissingThresholds: return "missing_thresholds";
        case ErrorCode::kFormat: return "format";
        case ErrorCode::kIo: return "io";
    }
    return "unknown";
}

}  // namespace confdrift
