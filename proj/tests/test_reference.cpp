#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dpnls/reference.hpp"

using namespace dpnls;

namespace {

constexpr double pi = std::numbers::pi;

// Frozen from an independent double-precision shooter (bisection on the central value,
// RK45 at rtol 1e-13, decay matched against e^{-r}/r).
constexpr double ustar_central_15 = 4.27654169691303;
constexpr double ustar_central_25 = 4.20874570702359;
constexpr double ustar_central_4 = 5.22387856072737;
constexpr double singular_v0_15 = 0.56554707879723;

}  // namespace

TEST(Talenti, SixthNormClosedForm) {
    const double exact = 3.0 * std::sqrt(3.0) * pi * pi / 4.0;
    EXPECT_NEAR(talenti_lq_norm(6.0), exact, 1e-12 * exact);
    EXPECT_NEAR(talenti_lq_norm_quadrature(6.0), exact, 1e-10 * exact);
}

TEST(Talenti, NehariIdentityAtZeroFrequency) {
    EXPECT_NEAR(talenti_gradient_sq(), talenti_lq_norm(6.0), 1e-10);
}

TEST(Talenti, NormsAgreeAcrossRoutes) {
    for (double q : {3.5, 4.0, 4.5, 5.0, 6.0, 8.0}) {
        const double a = talenti_lq_norm(q), b = talenti_lq_norm_quadrature(q);
        EXPECT_NEAR(a, b, 1e-10 * a) << "q=" << q;
    }
    // ‖W‖₄⁴ = 3√3π² by direct substitution.
    EXPECT_NEAR(talenti_lq_norm(4.0), 3.0 * std::sqrt(3.0) * pi * pi, 1e-11);
}

TEST(Talenti, NotInLowLebesgueSpaces) {
    EXPECT_THROW(talenti_lq_norm(3.0), NonIntegrable);
    EXPECT_THROW(talenti_lq_norm_quadrature(2.0), NonIntegrable);
}

TEST(Talenti, PointwiseResidual) {
    double worst = 0.0;
    for (int i = 1; i <= 2000; ++i) {
        const double r = 1e-3 * std::pow(1e7, i / 2000.0);
        const double w = talenti_value(r);
        const double res = talenti_second(r) + 2.0 / r * talenti_deriv(r) + std::pow(w, 5);
        worst = std::max(worst, std::abs(res) / std::max(1.0, std::pow(w, 5)));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Talenti, SigmaIsSobolevConstant) {
    // σ = ‖W‖₆⁴ and E(W) = σ^{3/2}/3.
    const double e = 0.5 * talenti_gradient_sq() - talenti_lq_norm(6.0) / 6.0;
    EXPECT_NEAR(e, std::pow(sigma_constant(), 1.5) / 3.0, 1e-12);
    EXPECT_NEAR(e, 4.27366406832304, 1e-11);
}

TEST(UStar, CentralValues) {
    EXPECT_NEAR(solve_ustar(1.5)->central_value, ustar_central_15, 1e-9);
    EXPECT_NEAR(solve_ustar(2.5)->central_value, ustar_central_25, 1e-9);
    EXPECT_NEAR(solve_ustar(4.0)->central_value, ustar_central_4, 1e-9);
}

TEST(UStar, CubicGroundStateMatchesKnownValue) {
    // The cubic ground state of -Δu + u = u³ has u(0) ≈ 4.3373877.
    EXPECT_NEAR(solve_ustar(3.0)->central_value, 4.33738767997688, 1e-9);
}

TEST(UStar, ProfileIsPositiveAndDecreasing) {
    const auto u = solve_ustar(2.0);
    const Profile& prof = u->profile;
    for (std::size_t i = 1; i < prof.size(); ++i) {
        ASSERT_GT(prof.u[i], 0.0);
        ASSERT_LE(prof.u[i], prof.u[i - 1]);
    }
    EXPECT_NEAR(prof.u.front(), 4.19168295444121, 1e-9);
}

TEST(UStar, RejectsExponentOutsideRange) {
    EXPECT_THROW(solve_ustar(5.0), InvalidArgument);
    EXPECT_THROW(solve_ustar(1.0), InvalidArgument);
}

TEST(SingularV, CentralValues) {
    EXPECT_NEAR(solve_singular_v(1.5)->central_value, singular_v0_15, 1e-9);
    EXPECT_NEAR(solve_singular_v(1.2)->central_value, 1.46684184693267, 1e-9);
    EXPECT_NEAR(solve_singular_v(1.8)->central_value, 0.184626915370082, 1e-9);
}

TEST(SingularV, StableUnderStartRadiusHalving) {
    for (double p : {1.2, 1.5, 1.8}) {
        const double v0 = solve_singular_v(p)->central_value;
        ReferenceOptions o;
        o.start_radius = 0.5 * start_radius(OdeSpec{SingularVEq{p}}, v0);
        const double v_half = solve_singular_v(p, o)->central_value;
        EXPECT_LT(std::abs(v_half - v0), 1e-7) << "p=" << p;
    }
}

TEST(SingularV, CollocationResidualIsSmall) {
    const auto v = solve_singular_v(1.5);
    EXPECT_LT(singular_v_collocation_residual(*v, 1e-3, 30.0), 1e-6);
}

TEST(SingularV, ThetaZero) {
    EXPECT_NEAR(theta0(1.5), std::pow(3.0, -0.25) * std::sqrt(singular_v0_15), 1e-12);
    EXPECT_NEAR(theta0(1.5), 0.5714182, 1e-6);
}

TEST(SingularV, OnlyDefinedBelowTwo) { EXPECT_THROW(solve_singular_v(2.0), InvalidArgument); }
