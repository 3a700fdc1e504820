// config.hpp
// Layered experiment configuration: built-in defaults, a key-value scenario
// file (INI-style sections) and command-line overrides, validated as a whole
// before any simulation starts. Unknown keys are rejected with the file line
// that introduced them.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tbsim/montecarlo.hpp"

namespace tbsim::cfg {

struct ScanSettings {
    int points = 16;
    double seconds_per_point = 10.0;
};

struct CalibrationSettings {
    double target_visibility = 0.91;
    double tolerance = 0.02;     ///< acceptance band on the probed correlation
    int max_iterations = 8;
    double seconds_per_probe = 20.0;
};

struct ExperimentConfig {
    std::string scenario = "default";
    mc::RunConfig run;
    mc::CoincidenceConfig coincidence; ///< period/tau filled from the run config
    ScanSettings scan;
    CalibrationSettings calib;

    /// Full key set in registry order, one "key = value" per line; the basis
    /// of the manifest hash, so any field change changes the hash.
    std::string canonical() const;
    /// FNV-1a over canonical(), as 16 hex digits.
    std::string hash() const;
    /// Cross-module validation; throws ConfigError listing all problems,
    /// appends non-fatal findings to `warnings`.
    void validate(std::vector<std::string>* warnings = nullptr) const;
};

/// Load defaults, then the optional scenario file, then "section.key=value"
/// overrides. Throws ConfigError with file:line context on unknown keys or
/// unparsable values. Does not validate; call validate() after, so callers
/// can report all problems at once.
ExperimentConfig load(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides);

/// All recognized keys (for --help and tests).
std::vector<std::string> known_keys();

/// JSON run manifest, written atomically after successful completion.
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config,
                    const std::vector<std::string>& outputs, double wall_clock_s);

} // namespace tbsim::cfg
