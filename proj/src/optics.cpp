#include "tbsim/optics.hpp"

#include <cmath>

namespace tbsim::optics {

namespace {
constexpr double kPi = 3.14159265358979323846;
const Complex kI(0.0, 1.0);

double reduce_deg(double deg) {
    double r = std::fmod(deg, 180.0);
    if (r < 0) r += 180.0;
    // Collapse values within rounding of 180 back to 0.
    if (r > 180.0 - 1e-11) r = 0.0;
    return r;
}
} // namespace

TimeBinQubit::TimeBinQubit(Complex amp_e, Complex amp_l) : amp_e_(amp_e), amp_l_(amp_l) {
    const double n2 = std::norm(amp_e) + std::norm(amp_l);
    if (!std::isfinite(n2) || std::abs(n2 - 1.0) > kTolExact)
        throw std::domain_error("time-bin qubit amplitudes must be normalized");
}

TimeBinQubit TimeBinQubit::equatorial(double phi) {
    const double s = 1.0 / std::sqrt(2.0);
    return {s, s * std::exp(kI * phi)};
}

TimeBinQubit TimeBinQubit::from_bloch(const BlochSetting& n) {
    const double theta = std::acos(std::clamp(n.n().z(), -1.0, 1.0));
    const double phi = std::atan2(n.n().y(), n.n().x());
    return {std::cos(theta / 2.0), std::sin(theta / 2.0) * std::exp(kI * phi)};
}

SlotAmplitudes utba_convert(const TimeBinQubit& q, const AnalyzerConfig& cfg) {
    if (!(cfg.tau_ns > 0)) throw std::domain_error("slot spacing tau must be positive");
    const double amp_scale = std::pow(10.0, -cfg.insertion_loss_db / 20.0) / std::sqrt(2.0);
    const Complex phase = std::exp(kI * cfg.phase_rad);
    SlotAmplitudes out;
    out.tau_ns = cfg.tau_ns;
    out.early = Jones(amp_scale * q.amp_e(), 0.0);
    out.middle = Jones(amp_scale * phase * q.amp_l(), amp_scale * q.amp_e());
    out.late = Jones(0.0, amp_scale * q.amp_l());
    return out;
}

Mat2 jones_hwp(double a) {
    const double c = std::cos(2.0 * a), s = std::sin(2.0 * a);
    Mat2 m;
    m << c, s,
         s, -c;
    return m;
}

Mat2 jones_qwp(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat2 m;
    m << c * c + kI * s * s, (1.0 - kI) * s * c,
         (1.0 - kI) * s * c, s * s + kI * c * c;
    return m;
}

Jones analysis_state(const BlochSetting& n) {
    const double theta = std::acos(std::clamp(n.n().z(), -1.0, 1.0));
    const double phi = std::atan2(n.n().y(), n.n().x());
    // V carries the cos(theta/2) pole amplitude in the analysis frame.
    return Jones(std::sin(theta / 2.0) * std::exp(kI * phi), std::cos(theta / 2.0));
}

WavePlatePair waveplate_angles_for(const BlochSetting& target) {
    // Stokes components of the target in the optics (H-up) frame.
    const double s1 = -target.n().z();
    const double s2 = target.n().x();
    const double s3 = -target.n().y();

    // The transmitted-port analysis state of QWP(q) -> HWP(h) -> PBS has
    // Stokes vector (cos(2q) cos A, sin(2q) cos A, -sin A) with A = 4h - 2q.
    const double chi = (std::abs(s1) + std::abs(s2) < 1e-14) ? 0.0 : std::atan2(s2, s1);
    const double a = std::atan2(-s3, std::hypot(s1, s2));
    const double qwp = chi / 2.0;
    const double hwp = (a + 2.0 * qwp) / 4.0;

    WavePlatePair pair{reduce_deg(qwp * 180.0 / kPi), reduce_deg(hwp * 180.0 / kPi)};

    // HWP angles repeat every 90 degrees up to a sign on the analysis state;
    // prefer the smallest representative.
    if (pair.hwp_deg >= 90.0) pair.hwp_deg -= 90.0;

    // Verify the closed form; refine by local scan on failure.
    const Jones want = analysis_state(target);
    auto fidelity = [&](double qd, double hd) {
        const Mat2 w = jones_hwp(hd * kPi / 180.0) * jones_qwp(qd * kPi / 180.0);
        const Complex amp = w(0, 0) * want(0) + w(0, 1) * want(1);
        return std::norm(amp);
    };
    double best = fidelity(pair.qwp_deg, pair.hwp_deg);
    if (best < 1.0 - 1e-9) {
        double step = 1.0;
        for (int iter = 0; iter < 400 && best < 1.0 - 5e-13; ++iter) {
            bool improved = false;
            for (const auto& [dq, dh] : {std::pair{step, 0.0}, {-step, 0.0},
                                         {0.0, step}, {0.0, -step}}) {
                const double f = fidelity(pair.qwp_deg + dq, pair.hwp_deg + dh);
                if (f > best) {
                    best = f;
                    pair.qwp_deg += dq;
                    pair.hwp_deg += dh;
                    improved = true;
                }
            }
            if (!improved) step *= 0.5;
        }
        pair.qwp_deg = reduce_deg(pair.qwp_deg);
        pair.hwp_deg = reduce_deg(pair.hwp_deg);
        if (best < 1.0 - 1e-9)
            throw NumericError("wave-plate solver failed to reach target fidelity");
    }
    return pair;
}

double middle_slot_click_probability(const TimeBinQubit& q, const AnalyzerConfig& cfg,
                                     int outcome) {
    // Middle-slot polarization state in the analysis frame, normalized.
    Eigen::Vector2cd psi;
    psi << q.amp_e(), std::exp(kI * cfg.phase_rad) * q.amp_l();
    const Mat2 proj = qstate::bloch_projector(cfg.projection, outcome);
    const double p = (psi.adjoint() * proj * psi).value().real();
    return 0.5 * std::pow(10.0, -cfg.insertion_loss_db / 10.0) * std::max(0.0, p);
}

double paddle_alignment_fraction(double theta_rad) {
    const double c = std::cos(theta_rad);
    return c * c;
}

qstate::TwoQubitState joint_middle_state(double phase_a, double phase_b) {
    qstate::Vec4c psi = qstate::Vec4c::Zero();
    psi(0) = 1.0 / std::sqrt(2.0);
    psi(3) = std::exp(kI * (phase_a + phase_b)) / std::sqrt(2.0);
    return qstate::TwoQubitState::pure(psi);
}

AnalyzerPovm analyzer_povm(const BlochSetting& plate_target, double phase_rad) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const Complex phase = std::exp(kI * phase_rad);

    // Kraus maps from the input time-bin qubit to the slot polarization, in
    // the analysis frame (component 0 = V-analog "up", 1 = H-analog "down").
    // Early slot: amp_e/sqrt(2) in |H>; middle: (amp_e -> V, amp_l -> e^{i phi} H);
    // late: amp_l/sqrt(2) in |V>.
    Mat2 k_early = Mat2::Zero(), k_mid = Mat2::Zero(), k_late = Mat2::Zero();
    k_early(1, 0) = inv_sqrt2;           // |H><e|
    k_mid(0, 0) = inv_sqrt2;             // |V><e|
    k_mid(1, 1) = inv_sqrt2 * phase;     // e^{i phi} |H><l|
    k_late(0, 1) = inv_sqrt2;            // |V><l|

    AnalyzerPovm povm;
    const std::array<Mat2, 3> kraus{k_early, k_mid, k_late};
    for (int s = 0; s < 3; ++s) {
        for (int outcome : {+1, -1}) {
            const Mat2 proj = qstate::bloch_projector(plate_target, outcome);
            povm.element[AnalyzerPovm::index(static_cast<Slot>(s), outcome)] =
                kraus[s].adjoint() * proj * kraus[s];
        }
    }
    return povm;
}

} // namespace tbsim::optics
