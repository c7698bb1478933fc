#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "dpnls/ode.hpp"
#include "dpnls/reference.hpp"

using namespace dpnls;

namespace {

std::shared_ptr<const std::function<double(double)>> potential(std::function<double(double)> f) {
    return std::make_shared<const std::function<double(double)>>(std::move(f));
}

double max_node_error(const Profile& prof, double r_cap) {
    double worst = 0.0;
    for (std::size_t i = 0; i < prof.size() && prof.r[i] <= r_cap; ++i)
        worst = std::max(worst, std::abs(prof.u[i] - talenti_value(prof.r[i])));
    return worst;
}

}  // namespace

TEST(Dopri5, ExponentialDecayToTolerance) {
    auto rhs = [](double, const State& y) -> State { return {y[1], y[0]}; };
    // u'' = u with u = e^{-r}.
    Dopri5 solver(rhs, 0.0, State{1.0, -1.0}, 1e-3, 1e-12);
    while (solver.r() < 5.0) solver.step(5.0);
    EXPECT_NEAR(solver.y()[0], std::exp(-5.0), 1e-10 * std::exp(-5.0) * 50);
}

TEST(Series, RegularStartMatchesEquation) {
    const NormalizedDoublePower eq{0.3, 0.2, 2.5};
    const double r = 1e-3;
    const State s = series_state(OdeSpec{eq}, 1.0, r);
    // u''(0) = source(1)/3 for the radial Laplacian.
    const double g0 = 0.3 - 0.2 - 1.0;
    EXPECT_NEAR(s[0], 1.0 + g0 / 6.0 * r * r, 1e-12);
    EXPECT_NEAR(s[1], g0 / 3.0 * r, 1e-9);
}

TEST(Trace, ZeroCoefficientsReproduceTalenti) {
    IntegrateOptions o;
    o.record = true;
    o.r_max = 200.0;
    for (bool deviation : {true, false}) {
        o.talenti_deviation = deviation;
        const Trajectory t = trace(OdeSpec{NormalizedDoublePower{0.0, 0.0, 2.5}}, 1.0, o);
        EXPECT_LT(max_node_error(t.path, 200.0), 1e-9) << "deviation=" << deviation;
    }
}

TEST(Trace, DeviationRouteAgreesWithDirectRoute) {
    IntegrateOptions o;
    o.record = true;
    o.r_max = 60.0;
    const OdeSpec spec{NormalizedDoublePower{1e-4, 3e-3, 2.5}};
    o.talenti_deviation = true;
    const Trajectory dev = trace(spec, 1.0, o);
    o.talenti_deviation = false;
    const Trajectory dir = trace(spec, 1.0, o);
    EXPECT_EQ(classify(dev.outcome), classify(dir.outcome));
    double worst = 0.0;
    for (double r = 0.5; r <= 20.0; r += 0.5) worst = std::max(worst, std::abs(dev.path.value(r) - dir.path.value(r)));
    EXPECT_LT(worst, 1e-8);
}

TEST(Classify, SingleFrequencyGroundStateSeparatesOutcomes) {
    const double u0 = solve_ustar(2.5)->central_value;
    const OdeSpec spec{UStarEq{2.5}};
    EXPECT_EQ(classify(integrate(spec, 1.02 * u0)), TrajectoryClass::Crosses);
    EXPECT_EQ(classify(integrate(spec, 0.98 * u0)), TrajectoryClass::Rebounds);
}

TEST(Classify, RejectsBadInput) {
    EXPECT_THROW(trace(OdeSpec{UStarEq{2.5}}, -1.0), InvalidArgument);
    IntegrateOptions o;
    o.rtol = 0.5;
    EXPECT_THROW(trace(OdeSpec{UStarEq{2.5}}, 1.0, o), InvalidArgument);
    EXPECT_THROW(trace(OdeSpec{NormalizedDoublePower{-1.0, 0.0, 2.5}}, 1.0), InvalidArgument);
}

TEST(DecayMatch, AcceptsExponentialTail) {
    const double a = 0.25, k = 0.5, r = 40.0;
    const double u = 1e-12 * std::exp(-k * r) / r, du = -u * (k + 1.0 / r);
    EXPECT_TRUE(decay_match(u, du, a, r));
    EXPECT_FALSE(decay_match(u, -du, a, r));
    EXPECT_FALSE(decay_match(u, 3.0 * du, a, r));
}

TEST(Oscillations, FreeOperatorZeroCount) {
    // V = 0, E = k²: v = sin(kr)/k has floor(kR/π) zeros in (0, R).
    const double k = 1.3, R = 20.0;
    LinearizedEq eq{2.0, k * k, potential([](double) { return 0.0; })};
    const auto res = count_oscillations(eq, R);
    EXPECT_EQ(res.zeros, static_cast<int>(std::floor(k * R / std::numbers::pi)));
}

TEST(Oscillations, HarmonicWellCountsEigenvaluesBelow) {
    // -v'' + r² v on the half line with v(0) = 0 has eigenvalues 3, 7, 11, ...
    auto V = potential([](double r) { return r * r; });
    for (auto [E, expected] : {std::pair{2.9, 0}, {3.1, 1}, {6.9, 1}, {7.1, 2}, {11.1, 3}}) {
        LinearizedEq eq{2.0, E, V};
        EXPECT_EQ(count_oscillations(eq, 8.0).zeros, expected) << "E=" << E;
    }
}

TEST(Oscillations, NeedsPotential) {
    LinearizedEq eq{2.0, 0.0, nullptr};
    EXPECT_THROW(count_oscillations(eq, 1.0), InvalidArgument);
}
