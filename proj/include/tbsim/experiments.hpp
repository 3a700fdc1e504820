// experiments.hpp
// Measurement procedures and estimators on top of the event simulation:
// the four CHSH setting configurations, correlation/S estimation with
// uncertainty propagation, fringe-visibility scans and the coincidence-driven
// phase calibration.
//
// Estimator functions are pure; procedures orchestrate Monte Carlo batches
// and reduce deterministically.

#pragma once

#include <array>
#include <vector>

#include "tbsim/montecarlo.hpp"

namespace tbsim::experiments {

using qstate::BlochSetting;

struct SettingsQuad {
    BlochSetting a1 = BlochSetting::z();
    BlochSetting a2 = BlochSetting::z();
    BlochSetting b1 = BlochSetting::z();
    BlochSetting b2 = BlochSetting::z();
};

/// Measurement bases for CHSH configuration `id` in {1,2,3,4}:
/// 1: equatorial great circle; 2: x-z circle with Alice at +-45 deg from the
/// poles; 3: the y-z analogue; 4: configuration 2's Alice pair rotated by
/// -pi/8 about y then -pi/4 about x. Bob's pair maximizes S for `tensor`.
SettingsQuad config_settings(int id, const qstate::CorrelationTensor& tensor);

/// Analytic S for a state at the given settings quad.
double analytic_chsh(const qstate::TwoQubitState& state, const SettingsQuad& q);

struct CorrEstimate {
    double e = 0;      ///< (n_pp + n_mm - n_pm - n_mp) / total
    double sigma = 0;  ///< binomial propagation sqrt((1 - e^2) / total)
    mc::CoincidenceCounts counts;
};

/// Correlation estimate from coincidence counts; throws
/// InsufficientDataError for an empty total. `multinomial_sigma` switches to
/// exact multinomial propagation of the four counts.
CorrEstimate estimate_e(const mc::CoincidenceCounts& counts, bool multinomial_sigma = false);

struct SEstimate {
    double s = 0;
    double sigma = 0;
    double significance = 0; ///< (s - 2) / sigma
    double duration_s = 0;   ///< integration time behind the estimate
};

SEstimate estimate_s(const CorrEstimate& e11, const CorrEstimate& e12,
                     const CorrEstimate& e21, const CorrEstimate& e22,
                     double duration_s = 0);

/// Expected CHSH band 2*sqrt(2)*(v -+ sigma_v), clamped to [0, 2*sqrt(2)].
std::pair<double, double> predicted_s_range(double v, double sigma_v);

enum class ScanMode {
    BobPhase,   ///< both sides equatorial; Bob's interferometer phase scanned
    AliceXZ     ///< Bob projects |e>/|l>; Alice scans the x-z great circle
};

struct FringePoint {
    double phase_rad = 0;
    mc::CoincidenceCounts counts;
    double integration_s = 0;
};

struct SinusoidFit {
    double offset = 0;    ///< A in N = A (1 + V cos(phase + phi0))
    double visibility = 0;
    double phi0 = 0;
    double residual = 0;  ///< rms of (N - model) over points
};

struct FringeScan {
    std::vector<FringePoint> points;
    std::array<SinusoidFit, 4> series_fit; ///< per outcome pair: pp, pm, mp, mm
    double visibility = 0;                 ///< mean of the four fitted V
    double phase_offset = 0;               ///< phi0 of the (+,+) series
    double residual = 0;                   ///< worst series rms residual
};

/// Least-squares fit of N(phase) = A (1 + V cos(phase + phi0)). Throws
/// NumericError when the system is singular (fewer than three distinct
/// phases). `poisson_weighted` weights points by 1/max(N,1).
SinusoidFit fit_sinusoid(const std::vector<double>& phases,
                         const std::vector<double>& counts, bool poisson_weighted = false);

/// Simulate one fringe point per phase and fit all four outcome series.
/// Phases must hold at least 5 points spanning at least 2*pi.
FringeScan run_visibility_scan(const mc::RunConfig& base, const mc::CoincidenceConfig& coinc,
                               ScanMode mode, const std::vector<double>& phases,
                               double seconds_per_point);

struct ChshConfigResult {
    int config_id = 0;
    SettingsQuad settings;
    std::array<CorrEstimate, 4> e; ///< (1,1), (1,2), (2,1), (2,2)
    SEstimate s;
};

/// Run the four setting pairs of one configuration, splitting the duration
/// evenly; per-pair runs derive decorrelated seeds from the base seed.
ChshConfigResult run_chsh_configuration(const mc::RunConfig& base,
                                        const mc::CoincidenceConfig& coinc, int config_id,
                                        double total_duration_s);

struct CalibrationResult {
    double phase_b_rad = 0; ///< calibrated interferometer phase
    int iterations = 0;
    double final_e11 = 0;
};

/// Adjust Bob's interferometer phase until the measured E11 of the
/// configuration-1 settings reaches target_v/sqrt(2) within tolerance,
/// mirroring the coincidence-driven calibration procedure. Throws
/// CalibrationError when the target is unreachable within max_iterations.
CalibrationResult calibrate_phase(mc::RunConfig base, const mc::CoincidenceConfig& coinc,
                                  double target_v, double tolerance, int max_iterations,
                                  double seconds_per_probe);

} // namespace tbsim::experiments
