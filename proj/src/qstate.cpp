#include "tbsim/qstate.hpp"

#include <cmath>

namespace tbsim::qstate {

namespace {
const Complex kI(0.0, 1.0);
} // namespace

Eigen::Matrix3d rotation_x(double a) {
    Eigen::Matrix3d r;
    r << 1, 0, 0,
         0, std::cos(a), -std::sin(a),
         0, std::sin(a), std::cos(a);
    return r;
}

Eigen::Matrix3d rotation_y(double a) {
    Eigen::Matrix3d r;
    r << std::cos(a), 0, std::sin(a),
         0, 1, 0,
         -std::sin(a), 0, std::cos(a);
    return r;
}

Eigen::Matrix3d rotation_z(double a) {
    Eigen::Matrix3d r;
    r << std::cos(a), -std::sin(a), 0,
         std::sin(a), std::cos(a), 0,
         0, 0, 1;
    return r;
}

const Mat2& pauli(int i) {
    static const Mat2 sx = (Mat2() << 0, 1, 1, 0).finished();
    static const Mat2 sy = (Mat2() << 0, -kI, kI, 0).finished();
    static const Mat2 sz = (Mat2() << 1, 0, 0, -1).finished();
    switch (i) {
        case 0: return sx;
        case 1: return sy;
        case 2: return sz;
        default: throw std::domain_error("pauli index must be 0, 1 or 2");
    }
}

BlochSetting::BlochSetting(const Vec3& n) : n_(n) {
    if (!n.allFinite() || std::abs(n.norm() - 1.0) > kTolExact)
        throw std::domain_error("Bloch setting must be a unit vector");
}

BlochSetting BlochSetting::equatorial(double azimuth_rad) {
    return BlochSetting(Vec3(std::cos(azimuth_rad), std::sin(azimuth_rad), 0.0));
}

BlochSetting BlochSetting::normalized(const Vec3& v) {
    const double norm = v.norm();
    if (!(norm > 0.0) || !v.allFinite())
        throw std::domain_error("cannot normalize a zero or non-finite vector");
    return BlochSetting(Vec3(v / norm));
}

Mat2 bloch_projector(const BlochSetting& n, int outcome) {
    if (outcome != 1 && outcome != -1)
        throw std::domain_error("measurement outcome must be +1 or -1");
    Mat2 m = Mat2::Identity();
    for (int i = 0; i < 3; ++i) m += static_cast<double>(outcome) * n.n()[i] * pauli(i);
    return 0.5 * m;
}

TwoQubitState::TwoQubitState(const Mat4& rho) : rho_(rho) {
    if (!rho.allFinite())
        throw std::domain_error("density matrix has non-finite entries");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kTolExact)
        throw std::domain_error("density matrix is not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > kTolExact || std::abs(rho.trace().imag()) > kTolExact)
        throw std::domain_error("density matrix trace differs from 1");
    Eigen::SelfAdjointEigenSolver<Mat4> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::domain_error("density matrix is not positive semidefinite");
}

TwoQubitState TwoQubitState::pure(const Vec4c& amplitudes) {
    const double norm = amplitudes.norm();
    if (!(norm > 0.0)) throw std::domain_error("zero state vector");
    const Vec4c psi = amplitudes / norm;
    return TwoQubitState(psi * psi.adjoint());
}

Mat2 TwoQubitState::reduced_a() const {
    Mat2 r = Mat2::Zero();
    for (int ia = 0; ia < 2; ++ia)
        for (int ja = 0; ja < 2; ++ja)
            for (int kb = 0; kb < 2; ++kb)
                r(ia, ja) += rho_(2 * ia + kb, 2 * ja + kb);
    return r;
}

Mat2 TwoQubitState::reduced_b() const {
    Mat2 r = Mat2::Zero();
    for (int ib = 0; ib < 2; ++ib)
        for (int jb = 0; jb < 2; ++jb)
            for (int ka = 0; ka < 2; ++ka)
                r(ib, jb) += rho_(2 * ka + ib, 2 * ka + jb);
    return r;
}

CorrelationTensor::CorrelationTensor(const Eigen::Matrix3d& t) : t_(t) {
    if (!t.allFinite()) throw std::domain_error("correlation tensor has non-finite entries");
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(t);
    if (svd.singularValues().maxCoeff() > 1.0 + kTolDerived)
        throw std::domain_error("correlation tensor has a singular value above 1");
}

TwoQubitState phi_plus() {
    Vec4c psi = Vec4c::Zero();
    psi(0) = 1.0 / std::sqrt(2.0);
    psi(3) = 1.0 / std::sqrt(2.0);
    return TwoQubitState::pure(psi);
}

TwoQubitState white_noise_mix(const TwoQubitState& state, double visibility) {
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw std::domain_error("visibility must lie in [0, 1]");
    const Mat4 rho = visibility * state.rho() + (1.0 - visibility) * 0.25 * Mat4::Identity();
    return TwoQubitState(rho);
}

namespace {
Mat4 kron2(const Mat2& a, const Mat2& b) {
    Mat4 k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return k;
}
} // namespace

double joint_probability(const TwoQubitState& state, const BlochSetting& a,
                         const BlochSetting& b, int outcome_a, int outcome_b) {
    const Mat4 proj = kron2(bloch_projector(a, outcome_a), bloch_projector(b, outcome_b));
    const double p = (state.rho() * proj).trace().real();
    // Clamp away sub-epsilon negatives from finite arithmetic.
    return std::min(1.0, std::max(0.0, p));
}

double correlation(const TwoQubitState& state, const BlochSetting& a, const BlochSetting& b) {
    Mat2 sa = Mat2::Zero(), sb = Mat2::Zero();
    for (int i = 0; i < 3; ++i) {
        sa += a.n()[i] * pauli(i);
        sb += b.n()[i] * pauli(i);
    }
    return (state.rho() * kron2(sa, sb)).trace().real();
}

CorrelationTensor correlation_tensor(const TwoQubitState& state) {
    Eigen::Matrix3d t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            t(i, j) = (state.rho() * kron2(pauli(i), pauli(j))).trace().real();
    return CorrelationTensor(t);
}

double chsh_value(const TwoQubitState& state, const BlochSetting& a1, const BlochSetting& a2,
                  const BlochSetting& b1, const BlochSetting& b2) {
    return std::abs(correlation(state, a1, b1) + correlation(state, a1, b2) +
                    correlation(state, a2, b1) - correlation(state, a2, b2));
}

std::pair<BlochSetting, BlochSetting> optimal_partner_settings(const CorrelationTensor& tensor,
                                                               const BlochSetting& a1,
                                                               const BlochSetting& a2) {
    const Vec3 u = tensor.t().transpose() * (a1.n() + a2.n());
    const Vec3 v = tensor.t().transpose() * (a1.n() - a2.n());
    if (u.norm() < 1e-12 || v.norm() < 1e-12)
        throw DegenerateSettingsError("partner settings are degenerate for this tensor");
    return {BlochSetting::normalized(u), BlochSetting::normalized(v)};
}

double horodecki_max(const CorrelationTensor& tensor) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(tensor.t());
    const auto& s = svd.singularValues(); // sorted descending
    return 2.0 * std::sqrt(s(0) * s(0) + s(1) * s(1));
}

} // namespace tbsim::qstate
