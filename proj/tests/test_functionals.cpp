#include <gtest/gtest.h>

#include <cmath>

#include "dpnls/functionals.hpp"
#include "dpnls/reference.hpp"
#include "dpnls/shooting.hpp"

using namespace dpnls;

namespace {

const SolutionRecord& sample_solution() {
    static const SolutionRecord rec = [] {
        const SolveResult res = find_solutions(2.5, 1e-2);
        if (res.records.empty()) throw std::runtime_error("no sample solution");
        return res.records.front();
    }();
    return rec;
}

Profile scaled(Profile prof, double s) {
    for (auto* v : {&prof.u, &prof.du, &prof.ddu})
        for (double& x : *v) x *= s;
    if (prof.tail) prof.tail->c *= s;
    return prof;
}

}  // namespace

TEST(Functionals, TalentiCriticalIdentities) {
    // The c/r tail model is accurate to O(r_end^{-2}); the slowest tail here is ‖W‖_{3.5}, ~ r_end^{-1/2}.
    const Profile W = talenti_profile(1e5, 8000);
    const FunctionalSet f = evaluate(W, 0.0, 2.5);
    EXPECT_NEAR(f.grad_l2sq, talenti_gradient_sq(), 1e-8 * f.grad_l2sq);
    EXPECT_NEAR(f.l6, talenti_lq_norm(6.0), 1e-8 * f.l6);
    EXPECT_NEAR(f.lp1, talenti_lq_norm(3.5), 1e-8 * f.lp1);
    EXPECT_TRUE(std::isinf(f.l2sq));
    EXPECT_NEAR(0.5 * f.grad_l2sq - f.l6 / 6.0, std::pow(sigma_constant(), 1.5) / 3.0, 1e-7);
}

TEST(Functionals, AmplitudeScalingLaws) {
    // u = λ W(λ² r): ‖∇u‖² and ‖u‖₆⁶ are invariant, ‖u‖_q^q scales as λ^{q-6}.
    const Profile W = talenti_profile();
    const FunctionalSet f1 = evaluate(W, 0.0, 2.5, 1.0);
    for (double lam : {0.1, 3.0, 40.0}) {
        const FunctionalSet f = evaluate(W, 0.0, 2.5, lam);
        EXPECT_NEAR(f.grad_l2sq / f1.grad_l2sq, 1.0, 1e-10);
        EXPECT_NEAR(f.l6 / f1.l6, 1.0, 1e-10);
        EXPECT_NEAR(f.lp1 / f1.lp1, std::pow(lam, 3.5 - 6.0), 1e-9);
    }
}

TEST(Functionals, SinglePowerGroundStateSatisfiesIdentities) {
    for (double p : {1.5, 2.5, 3.0}) {
        const auto u = solve_ustar(p);
        const IdentityResiduals r = identity_residuals(u->profile, 1.0, p, 1.0, {}, 0.0);
        EXPECT_LT(r.nehari, 1e-8) << "p=" << p;
        EXPECT_LT(std::abs(r.pohozaev), 1e-8) << "p=" << p;
        EXPECT_LT(std::abs(r.mass_law), 1e-8) << "p=" << p;
    }
}

TEST(Functionals, SolutionSatisfiesIdentities) {
    const SolutionRecord& rec = sample_solution();
    EXPECT_LT(rec.residuals.worst(), 1e-6);
}

TEST(Functionals, PerturbedProfileViolatesVirial) {
    const SolutionRecord& rec = sample_solution();
    const IdentityResiduals r = identity_residuals(scaled(rec.profile, 1.01), rec.omega, rec.p, rec.M);
    EXPECT_GT(std::abs(r.kfun), 1e-3);
    EXPECT_GT(r.worst(), 1e-3);
}

TEST(Functionals, KDecomposesIntoNehariAndPohozaev) {
    // K = (3/2)·Nehari - Pohozaev holds for any profile, so check it off-solution.
    const SolutionRecord& rec = sample_solution();
    const FunctionalSet f = evaluate(scaled(rec.profile, 0.97), rec.omega, rec.p, rec.M);
    const double p = rec.p, w = rec.omega;
    const double nehari = f.grad_l2sq + w * f.l2sq - f.lp1 - f.l6;
    const double poho = 0.5 * f.grad_l2sq + 1.5 * w * f.l2sq - 3.0 / (p + 1.0) * f.lp1 - 0.5 * f.l6;
    EXPECT_NEAR(f.K, 1.5 * nehari - poho, 1e-10 * f.grad_l2sq);
    EXPECT_NEAR(f.N_omega, nehari, 1e-12 * f.grad_l2sq);
}

TEST(Functionals, LinearizedFormOnSolution) {
    // On a solution ⟨L₊u, u⟩ = -(p-1)‖u‖_{p+1}^{p+1} - 4‖u‖₆⁶ < 0.
    const SolutionRecord& rec = sample_solution();
    const FunctionalSet& f = rec.functionals;
    const double q = linearized_form_on_u(f, rec.omega, rec.p);
    EXPECT_LT(q, 0.0);
    EXPECT_NEAR(q, -(rec.p - 1.0) * f.lp1 - 4.0 * f.l6, 1e-6 * std::abs(q));
}

TEST(Functionals, DivergentNormThrowsWithoutOverride) {
    const Profile W = talenti_profile();
    EXPECT_THROW(lq_norm(W, 2.0), NonIntegrable);
}
