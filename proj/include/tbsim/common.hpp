// common.hpp
// Shared error types, numeric tolerances and version info.

#pragma once

#include <stdexcept>
#include <string>

namespace tbsim {

inline constexpr const char* kVersion = "0.1.0";

// Tolerances used throughout: exact-algebra identities vs derived quantities.
inline constexpr double kTolExact = 1e-12;
inline constexpr double kTolDerived = 1e-10;

// Invalid or inconsistent configuration (rejected before any simulation starts).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: non-convergence, singular fit, iteration cap exceeded.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Phase calibration did not converge or target is unreachable.
class CalibrationError : public NumericError {
public:
    explicit CalibrationError(const std::string& what) : NumericError(what) {}
};

// Estimator called with no usable counts.
class InsufficientDataError : public std::runtime_error {
public:
    explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

// Partner-setting construction hit a zero direction (e.g. vanishing correlation tensor).
class DegenerateSettingsError : public std::domain_error {
public:
    explicit DegenerateSettingsError(const std::string& what) : std::domain_error(what) {}
};

// File I/O failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tbsim
