#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dpnls/branch.hpp"

using namespace dpnls;

namespace {

constexpr double pi = std::numbers::pi;
// ‖W‖_{3.5}^{3.5}, frozen from the Beta closed form evaluated in extended precision.
constexpr double w_norm_35 = 114.141271799054;

const SweepResult& short_sweep() {
    static const SweepResult sw = sweep(2.5, geometric_omegas(1e-2, 1e-4));
    return sw;
}

SolutionRecord synthetic(double omega, double mass) {
    SolutionRecord r;
    r.omega = omega;
    r.functionals.l2sq = mass;
    return r;
}

}  // namespace

TEST(Targets, ConstantsAtTwoAndAHalf) {
    const double cp = 2.5 * w_norm_35 / (12.0 * pi * 3.5);
    EXPECT_NEAR(c_p(2.5), cp, 1e-12);
    EXPECT_NEAR(law_target(Law::A, 2.5).first, 1.0 / cp, 1e-12);
    EXPECT_NEAR(law_target(Law::A, 2.5).first, 0.46239853, 1e-8);
    EXPECT_NEAR(law_target(Law::D_mass, 2.5).first, 8.716007, 1e-6);
    EXPECT_NEAR(law_target(Law::D_omega, 2.5).first, 4.6769972, 1e-7);
    EXPECT_NEAR(law_target(Law::D_mass_omega, 2.5).first, 1.1043042, 1e-7);
    EXPECT_NEAR(law_target(Law::B, 2.0).first, 2.0 / std::sqrt(3.0), 1e-15);
    EXPECT_EQ(law_target(Law::E, 2.0).first, 27.0);
}

TEST(Targets, ApplicabilityByExponent) {
    EXPECT_EQ(applicable_laws(2.5).size(), 4u);
    EXPECT_EQ(applicable_laws(2.0), (std::vector<Law>{Law::B, Law::E}));
    EXPECT_EQ(applicable_laws(1.5), (std::vector<Law>{Law::C, Law::F}));
    EXPECT_TRUE(applicable_laws(3.5).empty());
}

TEST(Omegas, GeometricList) {
    const auto w = geometric_omegas(1e-2, 1e-4);
    ASSERT_EQ(w.size(), 5u);
    EXPECT_DOUBLE_EQ(w.back(), 1e-2 * std::pow(10.0, -2.0));
    EXPECT_THROW(geometric_omegas(1e-4, 1e-2), InvalidArgument);
}

TEST(MassSlope, ExactForQuadratics) {
    // The nonuniform three-point stencil differentiates quadratics exactly.
    std::vector<SolutionRecord> pts;
    for (double w : {0.3, 0.1, 0.07, 0.02}) pts.push_back(synthetic(w, 1.0 + 3.0 * w - 5.0 * w * w));
    const auto s = mass_slope(pts);
    ASSERT_EQ(s.size(), 2u);
    for (const auto& sp : s) EXPECT_NEAR(sp.slope, 3.0 - 10.0 * sp.omega, 1e-12);
    EXPECT_THROW(mass_slope(std::vector<SolutionRecord>{pts[0], pts[1]}), InvalidArgument);
}

TEST(Sweep, FindsBothBranchesAtEveryFrequency) {
    const SweepResult& sw = short_sweep();
    EXPECT_EQ(sw.small.points.size(), 5u);
    EXPECT_EQ(sw.large.points.size(), 5u);
    for (std::size_t i = 1; i < sw.large.points.size(); ++i) {
        EXPECT_GT(sw.large.points[i].M, sw.large.points[i - 1].M);
        EXPECT_LT(sw.small.points[i].M, sw.small.points[i - 1].M);
    }
}

TEST(Sweep, WarmStartMatchesColdSolve) {
    const SweepResult& sw = short_sweep();
    const SolveResult cold = find_solutions(2.5, sw.large.points.back().omega);
    ASSERT_EQ(cold.records.size(), 2u);
    EXPECT_NEAR(sw.small.points.back().M, cold.records[0].M, 1e-10 * cold.records[0].M);
    EXPECT_NEAR(sw.large.points.back().M, cold.records[1].M, 1e-10 * cold.records[1].M);
}

TEST(Sweep, MassSlopeSignStableUnderRefinement) {
    const SweepResult& sw = short_sweep();
    const SweepResult fine = sweep(2.5, geometric_omegas(1e-2, 1e-4, std::pow(10.0, -0.25)));
    for (const BranchCurve* c : {&sw.large, &fine.large}) {
        ASSERT_GE(c->points.size(), 3u);
        for (std::size_t i = 1; i + 1 < c->points.size(); ++i) EXPECT_GT(c->ratios[i].slope_mass, 0.0);
    }
}

TEST(Laws, LargeBranchLawsImprove) {
    const SweepResult& sw = short_sweep();
    for (Law l : applicable_laws(2.5)) {
        const AsymptoticsReport rep = verify_law(sw.large, l);
        EXPECT_TRUE(rep.strictly_decreasing) << law_id(l);
        EXPECT_EQ(rep.samples.size(), 5u);
    }
    EXPECT_THROW(verify_law(sw.large, Law::B), InvalidArgument);
}

TEST(Laws, Triage) {
    AsymptoticsReport r;
    r.trend = true;
    r.final_error = 0.05;
    EXPECT_EQ(triage(r, 0.1), Verdict::Pass);
    r.final_error = 0.2;
    EXPECT_EQ(triage(r, 0.1), Verdict::Trend);
    r.trend = false;
    EXPECT_EQ(triage(r, 0.1), Verdict::Fail);
}

TEST(Fold, BracketedWithinOnePercent) {
    const FoldBracket f = detect_fold(2.5, 0.1, 1.0);
    EXPECT_LE(f.omega_hi / f.omega_lo, 1.01);
    EXPECT_EQ(f.count_lo, 2);
    EXPECT_EQ(f.count_hi, 0);
    EXPECT_GT(f.omega_lo, 0.2);
    EXPECT_LT(f.omega_hi, 0.25);
    EXPECT_THROW(detect_fold(2.5, 0.5, 1.0), ConvergenceFailure);
    EXPECT_THROW(detect_fold(3.5, 0.1, 1.0), InvalidArgument);
}

TEST(Barriers, HoldOnBothBranches) {
    const SweepResult& sw = short_sweep();
    for (const BranchCurve* c : {&sw.small, &sw.large}) {
        for (const auto& rec : c->points) {
            const BarrierReport b = check_barriers(rec);
            EXPECT_TRUE(b.upper_ok()) << to_string(rec.branch) << " omega=" << rec.omega << " margin=" << b.upper_margin;
            EXPECT_TRUE(b.lower_ok()) << to_string(rec.branch) << " omega=" << rec.omega << " margin=" << b.lower_margin;
        }
    }
}

TEST(Barriers, ViolatedByInflatedProfile) {
    SolutionRecord rec = short_sweep().large.points.back();
    for (double& u : rec.profile.u) u *= 1.05;
    EXPECT_FALSE(check_barriers(rec).upper_ok());
}
