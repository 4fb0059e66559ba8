#pragma once

#include <stdexcept>
#include <string>

namespace oodkit {

// Error taxonomy mirrors the CLI exit codes: config 2, numeric 3, artifact 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-fatal diagnostics (degenerate scale clamp, arcface fallback, ...).
void warn(const std::string& msg);

}  // namespace oodkit
