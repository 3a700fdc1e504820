#include "tbsim/experiments.hpp"

#include <algorithm>
#include <cmath>

namespace tbsim::experiments {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr uint64_t kScanStream = 101;
constexpr uint64_t kChshStream = 202;
constexpr uint64_t kCalibStream = 303;
} // namespace

SettingsQuad config_settings(int id, const qstate::CorrelationTensor& tensor) {
    const double s = 1.0 / kSqrt2;
    qstate::Vec3 a1, a2;
    switch (id) {
        case 1:
            a1 = qstate::Vec3(1, 0, 0);
            a2 = qstate::Vec3(0, 1, 0);
            break;
        case 2:
            a1 = qstate::Vec3(s, 0, s);
            a2 = qstate::Vec3(-s, 0, s);
            break;
        case 3:
            a1 = qstate::Vec3(0, s, s);
            a2 = qstate::Vec3(0, -s, s);
            break;
        case 4: {
            const Eigen::Matrix3d r =
                qstate::rotation_x(-kPi / 4) * qstate::rotation_y(-kPi / 8);
            a1 = r * qstate::Vec3(s, 0, s);
            a2 = r * qstate::Vec3(-s, 0, s);
            break;
        }
        default:
            throw std::domain_error("configuration id must be 1, 2, 3 or 4");
    }
    const BlochSetting sa1 = BlochSetting::normalized(a1);
    const BlochSetting sa2 = BlochSetting::normalized(a2);
    const auto [b1, b2] = qstate::optimal_partner_settings(tensor, sa1, sa2);
    return {sa1, sa2, b1, b2};
}

double analytic_chsh(const qstate::TwoQubitState& state, const SettingsQuad& q) {
    return qstate::chsh_value(state, q.a1, q.a2, q.b1, q.b2);
}

CorrEstimate estimate_e(const mc::CoincidenceCounts& c, bool multinomial_sigma) {
    const double total = static_cast<double>(c.total());
    if (total <= 0) throw InsufficientDataError("no coincidences to estimate a correlation from");
    CorrEstimate out;
    out.counts = c;
    const double same = static_cast<double>(c.n_pp + c.n_mm);
    const double diff = static_cast<double>(c.n_pm + c.n_mp);
    out.e = (same - diff) / total;
    if (multinomial_sigma) {
        // Delta-method propagation of the four raw counts.
        const double dp = (1.0 - out.e) / total;
        const double dm = (1.0 + out.e) / total;
        out.sigma = std::sqrt(dp * dp * same + dm * dm * diff);
    } else {
        out.sigma = std::sqrt(std::max(0.0, 1.0 - out.e * out.e) / total);
    }
    return out;
}

SEstimate estimate_s(const CorrEstimate& e11, const CorrEstimate& e12,
                     const CorrEstimate& e21, const CorrEstimate& e22, double duration_s) {
    SEstimate out;
    out.s = std::abs(e11.e + e12.e + e21.e - e22.e);
    out.sigma = std::sqrt(e11.sigma * e11.sigma + e12.sigma * e12.sigma +
                          e21.sigma * e21.sigma + e22.sigma * e22.sigma);
    out.significance = (out.s - 2.0) / out.sigma;
    out.duration_s = duration_s;
    return out;
}

std::pair<double, double> predicted_s_range(double v, double sigma_v) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("visibility must lie in [0, 1]");
    const double smax = 2.0 * kSqrt2;
    auto clamp = [smax](double x) { return std::min(smax, std::max(0.0, x)); };
    return {clamp(smax * (v - sigma_v)), clamp(smax * (v + sigma_v))};
}

SinusoidFit fit_sinusoid(const std::vector<double>& phases, const std::vector<double>& counts,
                         bool poisson_weighted) {
    if (phases.size() != counts.size() || phases.size() < 3)
        throw NumericError("sinusoid fit needs at least three (phase, count) points");
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < phases.size(); ++i) {
        const double w = poisson_weighted ? 1.0 / std::max(counts[i], 1.0) : 1.0;
        const Eigen::Vector3d row(1.0, std::cos(phases[i]), std::sin(phases[i]));
        m += w * row * row.transpose();
        rhs += w * counts[i] * row;
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible())
        throw NumericError("sinusoid fit is singular; need at least three distinct phases");
    const Eigen::Vector3d x = lu.solve(rhs);
    const double a = x(0), b = x(1), c = x(2);
    if (!(a > 0)) throw NumericError("sinusoid fit produced a non-positive offset");

    SinusoidFit fit;
    fit.offset = a;
    fit.visibility = std::hypot(b, c) / a;
    fit.phi0 = std::atan2(-c, b);
    double ss = 0;
    for (size_t i = 0; i < phases.size(); ++i) {
        const double model = a + b * std::cos(phases[i]) + c * std::sin(phases[i]);
        ss += (counts[i] - model) * (counts[i] - model);
    }
    fit.residual = std::sqrt(ss / static_cast<double>(phases.size()));
    return fit;
}

namespace {

mc::CoincidenceCounts run_counts(const mc::RunConfig& rc, const mc::CoincidenceConfig& coinc) {
    mc::CoincidenceAccumulator acc(coinc);
    mc::simulate_run(rc, acc);
    return acc.counts();
}

} // namespace

FringeScan run_visibility_scan(const mc::RunConfig& base, const mc::CoincidenceConfig& coinc,
                               ScanMode mode, const std::vector<double>& phases,
                               double seconds_per_point) {
    if (phases.size() < 5)
        throw ConfigError("visibility scan needs at least 5 phase points");
    const auto [lo, hi] = std::minmax_element(phases.begin(), phases.end());
    if (*hi - *lo < 2 * kPi - 1e-6)
        throw ConfigError("visibility scan phases must span at least 2*pi");
    if (!(seconds_per_point > 0)) throw ConfigError("scan integration time must be positive");

    FringeScan scan;
    scan.points.reserve(phases.size());
    for (size_t i = 0; i < phases.size(); ++i) {
        mc::RunConfig rc = base;
        rc.duration_s = seconds_per_point;
        rc.source.seed = derive_stream_key(base.source.seed, kScanStream, i);
        if (mode == ScanMode::BobPhase) {
            rc.alice.projection = BlochSetting::equatorial(0.0);
            rc.bob.projection = BlochSetting::equatorial(0.0);
            rc.bob.phase_rad = base.bob.phase_rad + phases[i];
        } else {
            rc.bob.projection = BlochSetting::z();
            rc.alice.projection =
                BlochSetting(qstate::Vec3(std::sin(phases[i]), 0.0, std::cos(phases[i])));
        }
        scan.points.push_back({phases[i], run_counts(rc, coinc), seconds_per_point});
    }

    std::vector<double> series(phases.size());
    for (int s = 0; s < 4; ++s) {
        for (size_t i = 0; i < phases.size(); ++i) {
            const auto& c = scan.points[i].counts;
            const uint64_t n = s == 0 ? c.n_pp : s == 1 ? c.n_pm : s == 2 ? c.n_mp : c.n_mm;
            series[i] = static_cast<double>(n);
        }
        scan.series_fit[s] = fit_sinusoid(phases, series);
    }
    scan.visibility = (scan.series_fit[0].visibility + scan.series_fit[1].visibility +
                       scan.series_fit[2].visibility + scan.series_fit[3].visibility) / 4.0;
    scan.phase_offset = scan.series_fit[0].phi0;
    scan.residual = std::max({scan.series_fit[0].residual, scan.series_fit[1].residual,
                              scan.series_fit[2].residual, scan.series_fit[3].residual});
    return scan;
}

ChshConfigResult run_chsh_configuration(const mc::RunConfig& base,
                                        const mc::CoincidenceConfig& coinc, int config_id,
                                        double total_duration_s) {
    if (!(total_duration_s > 0)) throw ConfigError("CHSH run duration must be positive");
    ChshConfigResult out;
    out.config_id = config_id;
    out.settings = config_settings(config_id, qstate::correlation_tensor(qstate::phi_plus()));

    const BlochSetting* alice[2] = {&out.settings.a1, &out.settings.a2};
    const BlochSetting* bob[2] = {&out.settings.b1, &out.settings.b2};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            mc::RunConfig rc = base;
            rc.duration_s = total_duration_s / 4.0;
            rc.source.seed = derive_stream_key(base.source.seed, kChshStream,
                                               static_cast<uint64_t>(4 * config_id + 2 * i + j));
            rc.alice.projection = *alice[i];
            rc.bob.projection = *bob[j];
            out.e[2 * i + j] = estimate_e(run_counts(rc, coinc));
        }
    }
    out.s = estimate_s(out.e[0], out.e[1], out.e[2], out.e[3], total_duration_s);
    return out;
}

CalibrationResult calibrate_phase(mc::RunConfig base, const mc::CoincidenceConfig& coinc,
                                  double target_v, double tolerance, int max_iterations,
                                  double seconds_per_probe) {
    if (!(target_v > 0 && target_v <= 1)) throw std::domain_error("target visibility must lie in (0, 1]");
    if (!(tolerance > 0)) throw std::domain_error("calibration tolerance must be positive");

    const auto quad = config_settings(1, qstate::correlation_tensor(qstate::phi_plus()));
    base.alice.projection = quad.a1;
    base.bob.projection = quad.b1;
    const double target = target_v / kSqrt2;

    uint64_t probe_idx = 0;
    auto probe = [&](double phase_b) {
        mc::RunConfig rc = base;
        rc.bob.phase_rad = phase_b;
        rc.duration_s = seconds_per_probe;
        rc.source.seed = derive_stream_key(base.source.seed, kCalibStream, probe_idx++);
        const auto counts = run_counts(rc, coinc);
        if (counts.total() == 0)
            throw CalibrationError("no coincidences observed during a calibration probe");
        return estimate_e(counts).e;
    };

    double phase_b = base.bob.phase_rad;
    for (int iter = 0; iter < max_iterations; ++iter) {
        const double e1 = probe(phase_b);
        const double e2 = probe(phase_b + kPi / 2);
        // E11(sum) = V cos(sum + pi/4) with sum = phi_A + phi_B, so the pair
        // (e1, -e2) points at angle sum + pi/4 regardless of the amplitude.
        if (std::abs(e1 - target) <= tolerance && std::abs(e2 + target) <= tolerance)
            return {phase_b, iter, e1};
        const double sum_est = std::atan2(-e2, e1) - kPi / 4;
        phase_b -= sum_est;
    }
    throw CalibrationError("phase calibration did not reach the target correlation");
}

} // namespace tbsim::experiments
