#include <gtest/gtest.h>

#include <cmath>

#include "dpnls/shooting.hpp"

using namespace dpnls;

TEST(Amplitude, LowerBoundFromMassLaw) {
    // Any solution satisfies ω < (5-p)/(2(p+1)) M^{p-1}.
    const double p = 2.5, w = 1e-3;
    const double lo = amplitude_lower_bound(p, w);
    EXPECT_NEAR((5.0 - p) / (2.0 * (p + 1.0)) * std::pow(lo, p - 1.0), w, 1e-15);
    const auto range = default_amplitude_range(p, w);
    EXPECT_EQ(range.first, lo);
    EXPECT_GT(range.second, std::pow(w, large_branch_exponent(p)));
}

TEST(FindSolutions, TwoSolutionsSmallFrequency) {
    const SolveResult res = find_solutions(2.5, 1e-3);
    ASSERT_EQ(res.records.size(), 2u);
    EXPECT_FALSE(res.scan.has_undecided());
    EXPECT_TRUE(res.failures.empty());
    const auto& small = res.records[0];
    const auto& large = res.records[1];
    EXPECT_LT(small.M, large.M);
    EXPECT_EQ(small.branch, Branch::Small);
    EXPECT_EQ(large.branch, Branch::Large);
    EXPECT_LT(small.dist_ustar, small.dist_talenti);
    EXPECT_LT(large.dist_talenti, large.dist_ustar);
    for (const auto& r : res.records) {
        EXPECT_NEAR(r.alpha, r.omega * std::pow(r.M, -4.0), 1e-15 * r.alpha);
        EXPECT_NEAR(r.beta, std::pow(r.M, r.p - 5.0), 1e-15 * r.beta);
        EXPECT_LT(r.residuals.worst(), 1e-6);
        EXPECT_LT(r.M_lo, r.M_hi);
        EXPECT_LE((r.M_hi - r.M_lo) / r.M, 1e-11);
        EXPECT_NEAR(r.u(0.0), r.M, 1e-12 * r.M);
        EXPECT_TRUE(r.profile.positive_decaying);
    }
}

TEST(FindSolutions, NoSolutionAtLargeFrequency) {
    const SolveResult res = find_solutions(2.5, 1e3);
    EXPECT_TRUE(res.records.empty());
    EXPECT_FALSE(res.scan.has_undecided());
}

TEST(FindSolutions, SupercubicHasSmallSolution) {
    for (double w : {0.1, 1.0, 10.0}) {
        const SolveResult res = find_solutions(4.0, w);
        ASSERT_GE(res.records.size(), 1u) << "omega=" << w;
        EXPECT_EQ(res.records.front().branch, Branch::Small) << "omega=" << w;
    }
}

TEST(FindSolutions, SolutionsAreInvariantUnderScanResolution) {
    SolveOptions coarse;
    coarse.scan.n_grid = 96;
    const SolveResult a = find_solutions(2.5, 1e-2);
    const SolveResult b = find_solutions(2.5, 1e-2, coarse);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
        EXPECT_NEAR(a.records[i].M, b.records[i].M, 1e-10 * a.records[i].M);
}

TEST(FindSolutions, RejectsBadProblem) {
    EXPECT_THROW(find_solutions(5.0, 1.0), InvalidArgument);
    EXPECT_THROW(find_solutions(2.5, 0.0), InvalidArgument);
    EXPECT_THROW(find_solutions(2.5, -1.0), InvalidArgument);
}

TEST(Scan, BracketsEnclosePhysicalClassChange) {
    const AmplitudeScan scan = scan_amplitudes(2.5, 1e-3);
    ASSERT_EQ(scan.brackets.size(), 2u);
    const auto fn = detail::amplitude_trace(2.5, 1e-3, IntegrateOptions{});
    for (const auto& [lo, hi] : scan.brackets) {
        const auto a = detail::scan_point(fn, lo).cls, b = detail::scan_point(fn, hi).cls;
        EXPECT_NE(a, b);
        EXPECT_NE(a, TrajectoryClass::Undecided);
        EXPECT_NE(b, TrajectoryClass::Undecided);
    }
}

TEST(Distances, SupDistanceOfIdenticalFunctionsIsZero) {
    EXPECT_EQ(sup_distance([](double r) { return std::exp(-r); }, [](double r) { return std::exp(-r); }), 0.0);
    EXPECT_NEAR(sup_distance([](double r) { return r; }, [](double) { return 0.0; }, 10.0), 10.0, 1e-14);
}
