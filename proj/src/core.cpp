#include "spotmatch/core.hpp"

namespace spotmatch {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::ManifestParse: return "ManifestParseError";
        case ErrorCode::DuplicateSequenceId: return "DuplicateSequenceId";
        case ErrorCode::MissingFrames: return "MissingFrames";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::CorruptImage: return "CorruptImage";
        case ErrorCode::DetectionParse: return "DetectionParseError";
        case ErrorCode::NoFramesMatched: return "NoFramesMatched";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InsufficientFrames: return "InsufficientFrames";
        case ErrorCode::ImageTooSmall: return "ImageTooSmall";
        case ErrorCode::NoFeatures: return "NoFeatures";
        case ErrorCode::DuplicateKey: return "DuplicateKey";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::Parse: return "ParseError";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::NoVerifiableMatches: return "NoVerifiableMatches";
        case ErrorCode::UnknownStage: return "UnknownStage";
        case ErrorCode::StaleInputs: return "StaleInputs";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "IoError";
    }
    return "UnknownError";
}

int error_code_exit_status(ErrorCode code) {
    // 0 is success; 1 is reserved for unexpected failures.
    return 2 + static_cast<int>(code);
}

}  // namespace spotmatch
