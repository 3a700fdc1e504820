// qstate.hpp
// Two-qubit state algebra: Bloch-vector measurement settings, Born-rule
// probabilities, correlation tensors and analytic CHSH values.
//
// Basis order is fixed as |ee>, |el>, |le>, |ll> with the convention
// |e> <-> Bloch +z and |l> <-> Bloch -z. An equatorial basis
// (|e> + e^{i phi}|l>)/sqrt(2) sits at azimuth phi measured from +x.
//
// Everything here is a pure function over immutable values and safe for
// concurrent use.

#pragma once

#include <complex>
#include <utility>

#include <Eigen/Dense>

#include "tbsim/common.hpp"

namespace tbsim::qstate {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec3 = Eigen::Vector3d;
using Vec4c = Eigen::Vector4cd;

/// Rotation of a Bloch vector about a Cartesian axis.
Eigen::Matrix3d rotation_x(double angle_rad);
Eigen::Matrix3d rotation_y(double angle_rad);
Eigen::Matrix3d rotation_z(double angle_rad);

/// Pauli matrix sigma_i for i in {0:x, 1:y, 2:z} in the {|e>,|l>} basis.
const Mat2& pauli(int i);

// A projective measurement basis named by a unit Bloch vector. Outcomes are
// labelled +1 (projector (I + n.sigma)/2) and -1.
class BlochSetting {
public:
    explicit BlochSetting(const Vec3& n);

    static BlochSetting x() { return BlochSetting(Vec3(1, 0, 0)); }
    static BlochSetting y() { return BlochSetting(Vec3(0, 1, 0)); }
    static BlochSetting z() { return BlochSetting(Vec3(0, 0, 1)); }
    /// Equatorial setting at the given azimuth from +x.
    static BlochSetting equatorial(double azimuth_rad);
    /// Normalize an arbitrary nonzero vector into a setting.
    static BlochSetting normalized(const Vec3& v);

    const Vec3& n() const { return n_; }

private:
    Vec3 n_;
};

/// Projector onto the `outcome` (+1/-1) eigenstate of n.sigma.
Mat2 bloch_projector(const BlochSetting& n, int outcome);

// Two-qubit density matrix in the |ee>,|el>,|le>,|ll> basis. Construction
// validates hermiticity, unit trace and positivity.
class TwoQubitState {
public:
    explicit TwoQubitState(const Mat4& rho);

    /// Rank-1 state |psi><psi| from amplitudes (normalized on entry).
    static TwoQubitState pure(const Vec4c& amplitudes);

    const Mat4& rho() const { return rho_; }

    Mat2 reduced_a() const; ///< partial trace over qubit B
    Mat2 reduced_b() const; ///< partial trace over qubit A

private:
    Mat4 rho_;
};

// 3x3 real correlation tensor T[i][j] = <sigma_i x sigma_j>. All singular
// values of a physical tensor are <= 1.
class CorrelationTensor {
public:
    explicit CorrelationTensor(const Eigen::Matrix3d& t);
    const Eigen::Matrix3d& t() const { return t_; }

private:
    Eigen::Matrix3d t_;
};

/// The maximally entangled state (|ee> + |ll>)/sqrt(2).
TwoQubitState phi_plus();

/// Werner mixture V*rho + (1-V)*I/4 realizing fringe visibility V.
TwoQubitState white_noise_mix(const TwoQubitState& state, double visibility);

/// Born-rule probability of the joint outcome (outcome_a, outcome_b) when
/// measuring along Bloch settings a and b. Outcomes are +1 or -1.
double joint_probability(const TwoQubitState& state, const BlochSetting& a,
                         const BlochSetting& b, int outcome_a, int outcome_b);

/// Correlation E(a, b) = <(a.sigma) x (b.sigma)> in [-1, 1].
double correlation(const TwoQubitState& state, const BlochSetting& a,
                   const BlochSetting& b);

CorrelationTensor correlation_tensor(const TwoQubitState& state);

/// CHSH combination S = |E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2)|.
double chsh_value(const TwoQubitState& state, const BlochSetting& a1,
                  const BlochSetting& a2, const BlochSetting& b1,
                  const BlochSetting& b2);

/// Bob's settings maximizing S for a given tensor and Alice pair:
/// b1 ~ T^t(a1+a2), b2 ~ T^t(a1-a2). Throws DegenerateSettingsError when a
/// direction vanishes before normalization.
std::pair<BlochSetting, BlochSetting> optimal_partner_settings(
    const CorrelationTensor& tensor, const BlochSetting& a1, const BlochSetting& a2);

/// Upper bound 2*sqrt(s1^2 + s2^2) over the two largest singular values;
/// no choice of settings can push S above it.
double horodecki_max(const CorrelationTensor& tensor);

} // namespace tbsim::qstate
