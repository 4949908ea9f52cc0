#include "medalcast/errors.hpp"

namespace medalcast {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingFile: return "MissingFile";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::DuplicateKey: return "DuplicateKey";
        case ErrorCode::UnknownEntity: return "UnknownEntity";
        case ErrorCode::ShareSumViolation: return "ShareSumViolation";
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::EmptySeries: return "EmptySeries";
        case ErrorCode::RuleNotApplicable: return "RuleNotApplicable";
        case ErrorCode::EmptyRegion: return "EmptyRegion";
        case ErrorCode::UnknownCategory: return "UnknownCategory";
        case ErrorCode::UnfilledCell: return "UnfilledCell";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::FeatureOutOfRange: return "FeatureOutOfRange";
        case ErrorCode::DegenerateTargets: return "DegenerateTargets";
        case ErrorCode::ZeroSum: return "ZeroSum";
        case ErrorCode::GateClosed: return "GateClosed";
        case ErrorCode::IndivisibleForest: return "IndivisibleForest";
        case ErrorCode::MissingNodeCounts: return "MissingNodeCounts";
        case ErrorCode::TooManyFeatures: return "TooManyFeatures";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::TooFewNations: return "TooFewNations";
        case ErrorCode::LeakageDetected: return "LeakageDetected";
        case ErrorCode::InsufficientHistory: return "InsufficientHistory";
        case ErrorCode::MissingCounterfactualColumn: return "MissingCounterfactualColumn";
        case ErrorCode::UnknownNation: return "UnknownNation";
    }
    return "Error";
}

bool is_io_error(ErrorCode code) {
    return code == ErrorCode::MissingFile || code == ErrorCode::SchemaViolation;
}

} // namespace medalcast
