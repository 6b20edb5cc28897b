#pragma once

#include <stdexcept>
#include <string>

namespace edgepoint {

/// Shape or rank violation: mismatched operands, non-scalar backward, ...
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mathematically invalid input: zero-norm vector, empty reduction, degenerate mesh.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration: unknown class name, k >= N, bad field.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number of the offending record.
struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

/// Training diverged (non-finite loss). Carries the epoch where it happened.
struct TrainingError : std::runtime_error {
    int epoch;
    TrainingError(int epoch_no, const std::string& msg)
        : std::runtime_error("epoch " + std::to_string(epoch_no) + ": " + msg), epoch(epoch_no) {}
};

/// No strategy satisfies the requested accuracy floor.
struct PlanningError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A required on-disk artifact (checkpoint, dataset cache) is missing.
struct ArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace edgepoint
