// optics.hpp
// Universal time-bin qubit analyzer model: three-slot expansion of a time-bin
// qubit, time-bin-to-polarization conversion in the middle slot, Jones-matrix
// wave plates and the plate-angle solver for arbitrary analysis bases.
//
// Jones vectors are stored as (H, V) component pairs. The converted middle-slot
// polarization qubit is analyzed in the frame where |V> plays the role of the
// early bin (Bloch +z) and |H> the late bin, so the Bloch vector of the
// converted qubit equals the Bloch vector of the input time-bin qubit when the
// interferometer phase is zero.
//
// All transformations are stateless; drift processes live in the Monte Carlo
// layer, not here.

#pragma once

#include <array>

#include "tbsim/qstate.hpp"

namespace tbsim::optics {

using qstate::BlochSetting;
using qstate::Complex;
using qstate::Mat2;
using Jones = Eigen::Vector2cd; ///< (H, V) amplitudes

// Single photon in superposition of two emission windows: amp_e|e> + amp_l|l>.
class TimeBinQubit {
public:
    TimeBinQubit(Complex amp_e, Complex amp_l);

    static TimeBinQubit early() { return {1.0, 0.0}; }
    static TimeBinQubit late() { return {0.0, 1.0}; }
    /// (|e> + e^{i phi}|l>)/sqrt(2)
    static TimeBinQubit equatorial(double phi);
    /// State whose Bloch vector is the given setting.
    static TimeBinQubit from_bloch(const BlochSetting& n);

    Complex amp_e() const { return amp_e_; }
    Complex amp_l() const { return amp_l_; }

private:
    Complex amp_e_, amp_l_;
};

/// Analyzer output: polarization amplitudes in the three chronologically
/// ordered slots separated by tau.
struct SlotAmplitudes {
    Jones early;
    Jones middle;
    Jones late;
    double tau_ns = 1.4;

    double total_norm2() const {
        return early.squaredNorm() + middle.squaredNorm() + late.squaredNorm();
    }
};

struct AnalyzerConfig {
    double phase_rad = 0.0;          ///< interferometer phase phi_A / phi_B
    double tau_ns = 1.4;             ///< arm travel-time difference
    double insertion_loss_db = 0.0;
    BlochSetting projection = BlochSetting::z();
};

/// Fast-axis orientations, reduced to [0, 180) degrees.
struct WavePlatePair {
    double qwp_deg = 0.0;
    double hwp_deg = 0.0;
};

/// Expand a time-bin qubit into the analyzer's three output slots. The early
/// residual slot carries |H>, the late residual |V>; the middle slot holds the
/// converted polarization qubit (amp_e -> V, amp_l -> e^{i phase} H), each path
/// with amplitude 1/sqrt(2). Insertion loss scales all amplitudes.
SlotAmplitudes utba_convert(const TimeBinQubit& q, const AnalyzerConfig& cfg);

/// Jones matrices for ideal wave plates with fast axis at `angle_rad` from
/// horizontal. HWP(0) = diag(1,-1), QWP(0) = diag(1,i) up to global phase.
Mat2 jones_hwp(double angle_rad);
Mat2 jones_qwp(double angle_rad);

/// Plate angles such that the PBS-transmitted (H) port after
/// QWP(qwp) -> HWP(hwp) projects onto the polarization state whose Bloch
/// vector (in the V-up analysis frame) is `target`. Closed form with a
/// numeric verification pass; smallest non-negative angles win among
/// equivalent classes.
WavePlatePair waveplate_angles_for(const BlochSetting& target);

/// Jones vector of the +1 eigenstate of n.sigma in the V-up analysis frame.
Jones analysis_state(const BlochSetting& n);

/// Probability that the analyzer fires the `outcome` (+1/-1) detector in the
/// middle slot: (1/2) * 10^(-loss/10) * |<outcome projector|psi_pol>|^2 where
/// psi_pol includes the interferometer phase.
double middle_slot_click_probability(const TimeBinQubit& q, const AnalyzerConfig& cfg,
                                     int outcome);

/// Transmission factor cos^2(theta) of a polarization paddle misaligned by
/// theta from the maximizing orientation.
double paddle_alignment_fraction(double theta_rad);

/// Joint two-photon state in the middle/middle slot pair for a maximally
/// entangled input, expressed in the analysis frame: the source state with an
/// extra phase phase_a + phase_b on the |ll> component. Equals phi_plus()
/// whenever phase_b = -phase_a.
qstate::TwoQubitState joint_middle_state(double phase_a, double phase_b);

// Per-arm POVM of a full analyzer (slot expansion + plate projection + PBS)
// acting on the input time-bin qubit. Index order: (early,+), (early,-),
// (middle,+), (middle,-), (late,+), (late,-). Elements sum to identity for a
// loss-free analyzer; channel losses and detector efficiencies are applied
// separately by the Monte Carlo layer.
enum class Slot : int { Early = 0, Middle = 1, Late = 2 };

struct AnalyzerPovm {
    std::array<Mat2, 6> element;
    static int index(Slot s, int outcome) {
        return 2 * static_cast<int>(s) + (outcome > 0 ? 0 : 1);
    }
};

/// Build the analyzer POVM for plates set to project onto `plate_target`
/// while the interferometer sits at phase `phase_rad` (loss-free).
AnalyzerPovm analyzer_povm(const BlochSetting& plate_target, double phase_rad);

} // namespace tbsim::optics
