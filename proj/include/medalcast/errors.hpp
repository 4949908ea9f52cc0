#pragma once

#include <stdexcept>
#include <string>

namespace medalcast {

enum class ErrorCode {
    // I/O and schema
    MissingFile,
    SchemaViolation,
    // dataset
    DuplicateKey,
    UnknownEntity,
    ShareSumViolation,
    // preprocess
    TooFewPoints,
    EmptySeries,
    RuleNotApplicable,
    EmptyRegion,
    UnknownCategory,
    UnfilledCell,
    // cart / forest
    ShapeMismatch,
    EmptyInput,
    FeatureOutOfRange,
    // twostage
    DegenerateTargets,
    ZeroSum,
    GateClosed,
    IndivisibleForest,
    // explain
    MissingNodeCounts,
    TooManyFeatures,
    // evaluate
    KeyMismatch,
    TooFewNations,
    LeakageDetected,
    InsufficientHistory,
    MissingCounterfactualColumn,
    // cli
    UnknownNation,
};

const char* error_code_name(ErrorCode code);

// I/O errors exit with 2, domain errors with 1.
bool is_io_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
          code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace medalcast
