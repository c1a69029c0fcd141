#pragma once
// Exception taxonomy shared by the library and the CLI exit-code mapping.

#include <stdexcept>
#include <string>

namespace xaieval {

// Invalid or inconsistent run configuration (CLI exit 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A required trained artifact (weights, reports) is absent (CLI exit 3).
struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training finished but failed a contract floor (CLI exit 4). `trace` carries
// the diagnostic dump (training curve or Pareto trace) as a JSON string.
struct TrainingFloorError : std::runtime_error {
    TrainingFloorError(const std::string& msg, std::string trace_json)
        : std::runtime_error(msg), trace(std::move(trace_json)) {}
    std::string trace;
};

}  // namespace xaieval
