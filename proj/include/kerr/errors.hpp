#pragma once

#include <stdexcept>
#include <string>

namespace kerr {

// Requested amplitude walks the state too close to the truncation boundary.
// Every constructor that can trip this takes a Guard flag to bypass it.
struct TruncationError : std::runtime_error {
    explicit TruncationError(const std::string& what) : std::runtime_error(what) {}
};

struct IntegrationError : std::runtime_error {
    IntegrationError(const std::string& what, double residual)
        : std::runtime_error(what), achieved_residual(residual) {}
    double achieved_residual;
};

struct ReconstructionError : std::runtime_error {
    explicit ReconstructionError(const std::string& what) : std::runtime_error(what) {}
};

struct CalibrationError : std::runtime_error {
    CalibrationError(const std::string& what, double residual)
        : std::runtime_error(what), residual(residual) {}
    double residual;
};

struct AnalysisError : std::runtime_error {
    explicit AnalysisError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

enum class Guard { enforce, bypass };

}  // namespace kerr
