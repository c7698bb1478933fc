#include <gtest/gtest.h>

#include <cmath>

#include "dpnls/shooting.hpp"
#include "dpnls/spectral.hpp"

using namespace dpnls;

namespace {

// -v'' + (r² - shift) v on (0, R) with v(0) = v(R) = 0: eigenvalues 4k - 1 - shift, k = 1, 2, ...
PotentialProfile harmonic(double shift, double R = 9.0, double tol_zero = 1e-6) {
    return make_potential([shift](double r) { return r * r - shift; }, R, 1.0, tol_zero);
}

const SolveResult& sample() {
    static const SolveResult res = find_solutions(2.5, 1e-3);
    return res;
}

}  // namespace

TEST(Quadrature, GaussLobattoNodesIntegrateExactly) {
    const auto x = detail::gll_nodes(8);
    ASSERT_EQ(x.size(), 9u);
    EXPECT_DOUBLE_EQ(x.front(), -1.0);
    EXPECT_DOUBLE_EQ(x.back(), 1.0);
    std::vector<double> gx, gw;
    detail::gauss_legendre(6, gx, gw);
    double s = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) s += gw[i] * std::pow(gx[i], 10);
    EXPECT_NEAR(s, 2.0 / 11.0, 1e-14);
}

TEST(HalfLine, HarmonicEigenvalues) {
    const auto ev = lowest_eigenvalues(harmonic(0.0), 4);
    const double exact[] = {3.0, 7.0, 11.0, 15.0};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(ev[i], exact[i], 1e-9) << "i=" << i;
}

TEST(HalfLine, ZeroEigenvalueIsInconclusive) {
    const GapResult g = nondegeneracy_gap(harmonic(3.0));
    EXPECT_LT(g.gap, 1e-6);
    EXPECT_FALSE(g.certified);
    EXPECT_TRUE(g.inconclusive);
    EXPECT_NEAR(g.lambda[1], 4.0, 1e-9);
    EXPECT_NEAR(g.lambda[2], 8.0, 1e-9);
}

TEST(HalfLine, ResolvedGapIsCertified) {
    const GapResult g = nondegeneracy_gap(harmonic(5.0));
    EXPECT_TRUE(g.certified);
    EXPECT_NEAR(g.gap, 2.0, 1e-9);
}

TEST(HalfLine, DeeperPotentialLowersEveryEigenvalue) {
    auto well = [](double depth) {
        return make_potential([depth](double r) { return 1.0 - depth * std::exp(-r * r / 4.0); }, 40.0, 1.0, 1e-6);
    };
    const auto base = lowest_eigenvalues(well(20.0), 4);
    const auto deep = lowest_eigenvalues(well(22.0), 4);
    for (int i = 0; i < 4; ++i) EXPECT_LT(deep[i], base[i]) << "i=" << i;
}

TEST(HalfLine, DirichletEigenvaluesDecreaseWithRadius) {
    auto well = [](double R) {
        return make_potential([](double r) { return 0.5 - 6.0 / (1.0 + r * r); }, R, 1.0, 1e-6);
    };
    const auto short_box = lowest_eigenvalues(well(10.0), 3);
    const auto long_box = lowest_eigenvalues(well(20.0), 3);
    for (int i = 0; i < 3; ++i) EXPECT_LE(long_box[i], short_box[i] + 1e-12) << "i=" << i;
}

TEST(HalfLine, RayleighQuotientOfEigenvector) {
    const auto pot = harmonic(0.0);
    const HalfLineOperator op(pot, 64, 8);
    const double l2 = op.eigenvalue(2);
    const auto x = op.eigenvector(l2);
    EXPECT_NEAR(op.rayleigh_quotient(x), l2, 1e-10 * l2);
    EXPECT_NEAR(l2, 7.0, 1e-9);
}

TEST(Counters, InertiaAgreesWithOscillation) {
    for (auto [shift, expected] : {std::pair{2.0, 0}, {4.0, 1}, {8.0, 2}, {12.0, 3}}) {
        const auto pot = harmonic(shift);
        EXPECT_EQ(count_negative(pot, 1e-6), expected) << "shift=" << shift;
        EXPECT_EQ(oscillation_count(pot, -1e-6), expected) << "shift=" << shift;
    }
}

TEST(Counters, RejectBadRequests) {
    EXPECT_THROW(lowest_eigenvalues(harmonic(0.0), 0), InvalidArgument);
    EXPECT_THROW(lowest_eigenvalues(harmonic(0.0), 9), InvalidArgument);
    EXPECT_THROW(HalfLineOperator(harmonic(0.0), 1, 8), InvalidArgument);
}

TEST(Solutions, MorseIndicesOfBothBranches) {
    const SolveResult& res = sample();
    ASSERT_EQ(res.records.size(), 2u);
    const SpectrumSummary small = analyze_spectrum(res.records[0]);
    const SpectrumSummary large = analyze_spectrum(res.records[1]);
    EXPECT_EQ(small.neg_count, 1);
    EXPECT_EQ(large.neg_count, 2);
    EXPECT_EQ(small.inertia_count, small.oscillation_count);
    EXPECT_EQ(large.inertia_count, large.oscillation_count);
    EXPECT_TRUE(small.gap_certified);
    EXPECT_TRUE(large.gap_certified);
    EXPECT_GT(small.gap0, 0.0);
    EXPECT_GT(large.gap0, 0.0);
    EXPECT_LT(small.rayleigh_rel, 1e-8);
    EXPECT_LT(large.rayleigh_rel, 1e-8);
}

TEST(Solutions, PhysicalScalingOfEigenvalues) {
    const SolutionRecord& rec = sample().records[1];
    const SpectrumSummary s = analyze_spectrum(rec);
    PotentialProfile pot = reduce_to_halfline(rec);
    pot.tol_zero = 1e-6 * rec.alpha;
    const auto ev = lowest_eigenvalues(pot, 4);
    for (std::size_t i = 0; i < ev.size(); ++i)
        EXPECT_NEAR(s.lambda[i], std::pow(rec.M, 4) * ev[i], 1e-12 * std::abs(s.lambda[i]));
    EXPECT_LT(s.lambda[1], 0.0);
    EXPECT_GT(s.lambda[2], 0.0);
}
