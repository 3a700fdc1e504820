#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tbsim/qstate.hpp"
#include "tbsim/rng.hpp"

using namespace tbsim;
using namespace tbsim::qstate;

namespace {

constexpr double kSqrt8 = 2.8284271247461903; // 2*sqrt(2)

BlochSetting random_setting(Rng& rng) {
    while (true) {
        const Vec3 v(rng.normal(), rng.normal(), rng.normal());
        if (v.norm() > 1e-6) return BlochSetting::normalized(v);
    }
}

TwoQubitState random_pure_state(Rng& rng) {
    Vec4c amps;
    for (int i = 0; i < 4; ++i) amps(i) = Complex(rng.normal(), rng.normal());
    return TwoQubitState::pure(amps);
}

// Independent route to the correlation tensor: outcome-weighted sums of
// Born-rule probabilities on the Cartesian axes.
Eigen::Matrix3d tensor_by_enumeration(const TwoQubitState& state) {
    const BlochSetting axes[3] = {BlochSetting::x(), BlochSetting::y(), BlochSetting::z()};
    Eigen::Matrix3d t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double e = 0;
            for (int oa : {+1, -1})
                for (int ob : {+1, -1})
                    e += oa * ob * joint_probability(state, axes[i], axes[j], oa, ob);
            t(i, j) = e;
        }
    return t;
}

} // namespace

TEST_CASE("phi_plus density matrix entries") {
    const Mat4 rho = phi_plus().rho();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            const bool corner = (i == 0 || i == 3) && (j == 0 || j == 3);
            CHECK(std::abs(rho(i, j) - (corner ? Complex(0.5) : Complex(0))) < kTolExact);
        }
}

TEST_CASE("phi_plus is maximally entangled: reduced states are I/2") {
    const auto state = phi_plus();
    for (const Mat2& red : {state.reduced_a(), state.reduced_b()}) {
        CHECK(std::abs(red(0, 0) - Complex(0.5)) < kTolExact);
        CHECK(std::abs(red(1, 1) - Complex(0.5)) < kTolExact);
        CHECK(std::abs(red(0, 1)) < kTolExact);
        CHECK(std::abs(red(1, 0)) < kTolExact);
    }
}

TEST_CASE("phi_plus correlation tensor is diag(1,-1,1) by enumeration") {
    const Eigen::Matrix3d expected = Eigen::Vector3d(1, -1, 1).asDiagonal();
    CHECK((tensor_by_enumeration(phi_plus()) - expected).cwiseAbs().maxCoeff() < kTolDerived);
    CHECK((correlation_tensor(phi_plus()).t() - expected).cwiseAbs().maxCoeff() < kTolDerived);
}

TEST_CASE("white noise mixing") {
    const auto state = phi_plus();
    CHECK((white_noise_mix(state, 1.0).rho() - state.rho()).cwiseAbs().maxCoeff() < kTolExact);
    CHECK((white_noise_mix(state, 0.0).rho() - 0.25 * Mat4::Identity()).cwiseAbs().maxCoeff() <
          kTolExact);
    CHECK_THROWS_AS(white_noise_mix(state, 1.2), std::domain_error);
    CHECK_THROWS_AS(white_noise_mix(state, -0.1), std::domain_error);
}

TEST_CASE("werner state at V=0.91 reaches the expected CHSH value at optimal settings") {
    const auto state = white_noise_mix(phi_plus(), 0.91);
    const auto tensor = correlation_tensor(state);
    const BlochSetting a1 = BlochSetting::x(), a2 = BlochSetting::y();
    const auto [b1, b2] = optimal_partner_settings(tensor, a1, a2);
    CHECK(chsh_value(state, a1, a2, b1, b2) == doctest::Approx(kSqrt8 * 0.91).epsilon(1e-12));
    CHECK(chsh_value(state, a1, a2, b1, b2) == doctest::Approx(2.574).epsilon(2e-4));
}

TEST_CASE("joint probabilities of phi_plus") {
    const auto state = phi_plus();
    const auto z = BlochSetting::z();
    CHECK(joint_probability(state, z, z, +1, +1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(joint_probability(state, z, z, +1, -1) == doctest::Approx(0.0).epsilon(1e-12));

    // Equatorial pair: P(+,+) = (1 + cos(alpha + beta)) / 4.
    for (const auto [alpha, beta] : {std::pair{0.3, 1.1}, {2.0, -0.7}, {-1.3, 0.4}}) {
        const double p = joint_probability(state, BlochSetting::equatorial(alpha),
                                           BlochSetting::equatorial(beta), +1, +1);
        CHECK(p == doctest::Approx(0.25 * (1 + std::cos(alpha + beta))).epsilon(1e-12));
    }
    CHECK_THROWS_AS(joint_probability(state, z, z, +1, 2), std::domain_error);
    CHECK_THROWS_AS(BlochSetting(Vec3(1, 1, 0)), std::domain_error);
}

TEST_CASE("correlations of phi_plus and werner states") {
    const auto state = phi_plus();
    CHECK(correlation(state, BlochSetting::z(), BlochSetting::z()) ==
          doctest::Approx(1.0).epsilon(1e-12));
    for (const auto [alpha, beta] : {std::pair{0.2, 0.9}, {1.7, 2.4}}) {
        CHECK(correlation(state, BlochSetting::equatorial(alpha), BlochSetting::equatorial(beta)) ==
              doctest::Approx(std::cos(alpha + beta)).epsilon(1e-12));
    }
    const auto sait = white_noise_mix(state, 0.854);
    CHECK(correlation(sait, BlochSetting::z(), BlochSetting::z()) ==
          doctest::Approx(0.854).epsilon(1e-12));
}

TEST_CASE("chsh_value at canonical settings") {
    const auto state = phi_plus();
    const BlochSetting a1 = BlochSetting::equatorial(0), a2 = BlochSetting::equatorial(M_PI_2);
    const BlochSetting b1 = BlochSetting::equatorial(-M_PI_4), b2 = BlochSetting::equatorial(M_PI_4);
    CHECK(chsh_value(state, a1, a2, b1, b2) == doctest::Approx(kSqrt8).epsilon(1e-12));

    const auto mixed = white_noise_mix(state, 0.0);
    CHECK(chsh_value(mixed, a1, a2, b1, b2) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("optimal partner settings") {
    const CorrelationTensor t(Eigen::Vector3d(1, -1, 1).asDiagonal());
    const BlochSetting a1 = BlochSetting::x(), a2 = BlochSetting::z();
    const auto [b1, b2] = optimal_partner_settings(t, a1, a2);
    const Vec3 expect_b1 = Vec3(1, 0, 1).normalized();
    const Vec3 expect_b2 = Vec3(1, 0, -1).normalized();
    CHECK((b1.n() - expect_b1).norm() < kTolDerived);
    CHECK((b2.n() - expect_b2).norm() < kTolDerived);
    CHECK(chsh_value(phi_plus(), a1, a2, b1, b2) == doctest::Approx(kSqrt8).epsilon(1e-9));

    const CorrelationTensor zero(Eigen::Matrix3d::Zero());
    CHECK_THROWS_AS(optimal_partner_settings(zero, a1, a2), DegenerateSettingsError);
}

TEST_CASE("any orthonormal Alice pair achieves 2*sqrt(2) on the ideal state") {
    Rng rng(11);
    const auto state = phi_plus();
    const auto tensor = correlation_tensor(state);
    for (int trial = 0; trial < 50; ++trial) {
        const BlochSetting a1 = random_setting(rng);
        Vec3 perp(rng.normal(), rng.normal(), rng.normal());
        perp -= perp.dot(a1.n()) * a1.n();
        if (perp.norm() < 1e-6) continue;
        const BlochSetting a2 = BlochSetting::normalized(perp);
        const auto [b1, b2] = optimal_partner_settings(tensor, a1, a2);
        CHECK(chsh_value(state, a1, a2, b1, b2) == doctest::Approx(kSqrt8).epsilon(1e-9));
    }
}

TEST_CASE("horodecki bound values") {
    CHECK(horodecki_max(CorrelationTensor(Eigen::Vector3d(1, -1, 1).asDiagonal())) ==
          doctest::Approx(kSqrt8).epsilon(1e-12));
    for (double v : {0.3, 0.7, 0.91}) {
        CHECK(horodecki_max(CorrelationTensor(Eigen::Vector3d(v, -v, v).asDiagonal())) ==
              doctest::Approx(kSqrt8 * v).epsilon(1e-12));
    }
    CHECK(horodecki_max(CorrelationTensor(Eigen::Matrix3d::Zero())) == doctest::Approx(0.0));
}

TEST_CASE("probabilities are normalized and bounded for random states and settings") {
    Rng rng(22);
    for (int trial = 0; trial < 300; ++trial) {
        const auto state = trial % 2 ? random_pure_state(rng)
                                     : white_noise_mix(random_pure_state(rng), rng.uniform());
        const auto a = random_setting(rng), b = random_setting(rng);
        double sum = 0;
        for (int oa : {+1, -1})
            for (int ob : {+1, -1}) {
                const double p = joint_probability(state, a, b, oa, ob);
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
                sum += p;
            }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("chsh never exceeds the horodecki bound over random settings") {
    Rng rng(33);
    for (int trial = 0; trial < 1200; ++trial) {
        const auto state = trial % 3 ? random_pure_state(rng)
                                     : white_noise_mix(random_pure_state(rng), rng.uniform());
        const auto tensor = correlation_tensor(state);
        const double s = chsh_value(state, random_setting(rng), random_setting(rng),
                                    random_setting(rng), random_setting(rng));
        CHECK(s <= horodecki_max(tensor) + 1e-9);
    }
}

TEST_CASE("born-rule correlation equals the tensor bilinear form") {
    Rng rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        const auto state = random_pure_state(rng);
        const auto tensor = correlation_tensor(state);
        const auto a = random_setting(rng), b = random_setting(rng);
        const double by_born = correlation(state, a, b);
        const double by_tensor = a.n().dot(tensor.t() * b.n());
        CHECK(by_born == doctest::Approx(by_tensor).epsilon(1e-10));
    }
}

TEST_CASE("white noise scales the correlation tensor linearly") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        const auto state = random_pure_state(rng);
        const double v = rng.uniform();
        const Eigen::Matrix3d t1 = correlation_tensor(state).t();
        const Eigen::Matrix3d tv = correlation_tensor(white_noise_mix(state, v)).t();
        CHECK((tv - v * t1).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("optimal partner settings achieve the formula value and are locally maximal") {
    Rng rng(66);
    for (int trial = 0; trial < 30; ++trial) {
        const auto state = white_noise_mix(random_pure_state(rng), 0.5 + 0.5 * rng.uniform());
        const auto tensor = correlation_tensor(state);
        const BlochSetting a1 = random_setting(rng);
        Vec3 perp(rng.normal(), rng.normal(), rng.normal());
        perp -= perp.dot(a1.n()) * a1.n();
        if (perp.norm() < 1e-6) continue;
        const BlochSetting a2 = BlochSetting::normalized(perp);

        std::pair<BlochSetting, BlochSetting> partner{BlochSetting::z(), BlochSetting::z()};
        try {
            partner = optimal_partner_settings(tensor, a1, a2);
        } catch (const DegenerateSettingsError&) {
            continue;
        }
        const auto& [b1, b2] = partner;
        const double expected = (tensor.t().transpose() * (a1.n() + a2.n())).norm() +
                                (tensor.t().transpose() * (a1.n() - a2.n())).norm();
        const double s = chsh_value(state, a1, a2, b1, b2);
        CHECK(s == doctest::Approx(expected).epsilon(1e-9));

        // No small perturbation of Bob's settings may increase S.
        for (int k = 0; k < 12; ++k) {
            const Vec3 d1(rng.normal(), rng.normal(), rng.normal());
            const Vec3 d2(rng.normal(), rng.normal(), rng.normal());
            const BlochSetting p1 = BlochSetting::normalized(b1.n() + 0.01 * d1);
            const BlochSetting p2 = BlochSetting::normalized(b2.n() + 0.01 * d2);
            CHECK(chsh_value(state, a1, a2, p1, p2) <= s + 1e-9);
        }
    }
}

TEST_CASE("state invariants are enforced") {
    Mat4 bad = phi_plus().rho();
    bad(0, 1) = Complex(0.2, 0.1); // breaks hermiticity
    CHECK_THROWS_AS(TwoQubitState{bad}, std::domain_error);

    Mat4 traceless = 0.5 * Mat4::Identity();
    CHECK_THROWS_AS(TwoQubitState{traceless}, std::domain_error);

    Mat4 negative = Mat4::Zero();
    negative(0, 0) = 1.5;
    negative(1, 1) = -0.5;
    CHECK_THROWS_AS(TwoQubitState{negative}, std::domain_error);
}
