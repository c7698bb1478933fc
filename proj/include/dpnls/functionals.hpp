#pragma once

// Norms and functionals of radial profiles in R^3, plus the residuals of the
// Nehari / Pohozaev / virial identities.
//
// A profile stores the amplitude-normalized shape w; the physical function is
// u(r) = M·w(M² r). Under that rescaling ‖u‖_q^q = M^{q-6}‖w‖_q^q and ‖∇u‖² = ‖∇w‖².

#include <cmath>
#include <limits>

#include "dpnls/errors.hpp"
#include "dpnls/ode.hpp"
#include "dpnls/special.hpp"

namespace dpnls {

struct QuadOptions {
    double rel_target = 1e-8;
    bool allow_truncation = false;  ///< integrate only over the nodes when no tail model is attached
};

struct FunctionalSet {
    double E = 0.0;
    double K = 0.0;
    double S_omega = 0.0;
    double N_omega = 0.0;
    double l2sq = 0.0;
    double lp1 = 0.0;  ///< ‖u‖_{p+1}^{p+1}
    double l6 = 0.0;   ///< ‖u‖_6^6
    double grad_l2sq = 0.0;
    double c6 = 1.0;  ///< coefficient of the critical term (0 for -Δu + ωu - u^p = 0)
};

struct IdentityResiduals {
    double nehari = 0.0;
    double pohozaev = 0.0;
    double kfun = 0.0;
    double mass_law = 0.0;

    double worst() const {
        return std::max({std::abs(nehari), std::abs(pohozaev), std::abs(kfun), std::abs(mass_law)});
    }
};

namespace detail {

inline constexpr double four_pi = 4.0 * special::pi;

/// ∫_R^∞ e^{-s r} r^m dr.
inline double exp_power_tail(double s, double m, double R) {
    if (s > 0.0) return std::pow(s, -m - 1.0) * special::upper_gamma(m + 1.0, s * R);
    if (m < -1.0) return -std::pow(R, m + 1.0) / (m + 1.0);
    throw NonIntegrable("algebraic tail integral diverges (exponent " + std::to_string(m) + ")");
}

/// 4π∫_R^∞ |u|^q r² dr for the tail model.
inline double tail_lq(const TailModel& t, double q, double R) {
    if (t.c == 0.0) return 0.0;
    return four_pi * std::pow(std::abs(t.c), q) * exp_power_tail(q * t.kappa, 2.0 - q * t.power, R);
}

/// 4π∫_R^∞ |u'|² r² dr for the tail model.
inline double tail_grad(const TailModel& t, double R) {
    if (t.c == 0.0) return 0.0;
    const double s = 2.0 * t.kappa, P = t.power, k = t.kappa;
    double acc = 0.0;
    if (k > 0.0) {
        acc += k * k * exp_power_tail(s, 2.0 - 2.0 * P, R);
        acc += 2.0 * k * P * exp_power_tail(s, 1.0 - 2.0 * P, R);
    }
    acc += P * P * exp_power_tail(s, -2.0 * P, R);
    return four_pi * t.c * t.c * acc;
}

/// Integrals over the node range with 5-point Gauss–Legendre on each Hermite interval.
/// `g(u, du)` is integrated against 4π r² dr.
template <class G>
double node_integral(const Profile& prof, G&& g) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < prof.size(); ++i) {
        const double r0 = prof.r[i], r1 = prof.r[i + 1], h = r1 - r0;
        double part = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            const double x = r0 + h * special::GaussLegendre5::nodes[k];
            const auto [u, du] = hermite(r0, r1, prof.u[i], prof.u[i + 1], prof.du[i], prof.du[i + 1], prof.ddu[i],
                                         prof.ddu[i + 1], x);
            part += special::GaussLegendre5::weights[k] * g(u, du) * x * x;
        }
        total += part * h;
    }
    return four_pi * total;
}

inline void check_truncation(const Profile& prof, double q, double integral, const QuadOptions& o) {
    if (prof.tail || o.allow_truncation) return;
    const double R = prof.r_end();
    const double estimate = four_pi * std::pow(std::abs(prof.u.back()), q) * R * R * R;
    if (estimate > o.rel_target * std::abs(integral))
        throw NonIntegrable("profile has no tail model and the truncation estimate is not negligible");
}

}  // namespace detail

/// ‖u‖_q^q = 4π∫|u|^q r² dr of u(r) = amplitude·w(amplitude²·r), w the stored profile.
inline double lq_norm(const Profile& prof, double q, double amplitude = 1.0, const QuadOptions& o = {}) {
    if (!(q >= 1.0)) throw InvalidArgument("lq_norm: q must be >= 1");
    if (prof.size() < 2) return 0.0;
    double body = detail::node_integral(prof, [q](double u, double) { return std::pow(std::abs(u), q); });
    detail::check_truncation(prof, q, body, o);
    if (prof.tail) body += detail::tail_lq(*prof.tail, q, prof.r_end());
    return std::pow(amplitude, q - 6.0) * body;
}

/// ‖∇u‖² (invariant under the amplitude rescaling).
inline double grad_norm_sq(const Profile& prof, const QuadOptions& o = {}) {
    if (prof.size() < 2) return 0.0;
    double body = detail::node_integral(prof, [](double, double du) { return du * du; });
    if (!prof.tail && !o.allow_truncation) {
        const double R = prof.r_end();
        const double est = detail::four_pi * prof.du.back() * prof.du.back() * R * R * R;
        if (est > o.rel_target * body) throw NonIntegrable("gradient tail not negligible without tail model");
    }
    if (prof.tail) body += detail::tail_grad(*prof.tail, prof.r_end());
    return body;
}

namespace detail {

inline double lq_or_inf(const Profile& prof, double q, double amplitude, const QuadOptions& o) {
    try {
        return lq_norm(prof, q, amplitude, o);
    } catch (const NonIntegrable&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

/// All functionals of u(r) = amplitude·w(amplitude² r) at frequency omega.
/// Divergent norms (e.g. ‖W‖₂) are reported as +inf; with omega == 0 the mass term is dropped.
inline FunctionalSet evaluate(const Profile& prof, double omega, double p, double amplitude = 1.0,
                              const QuadOptions& o = {}, double c6 = 1.0) {
    FunctionalSet f;
    f.c6 = c6;
    f.grad_l2sq = grad_norm_sq(prof, o);
    f.l2sq = detail::lq_or_inf(prof, 2.0, amplitude, o);
    f.lp1 = detail::lq_or_inf(prof, p + 1.0, amplitude, o);
    f.l6 = lq_norm(prof, 6.0, amplitude, o);
    const double mass = omega == 0.0 ? 0.0 : omega * f.l2sq;
    f.E = 0.5 * f.grad_l2sq - f.lp1 / (p + 1.0) - c6 * f.l6 / 6.0;
    f.K = f.grad_l2sq - 3.0 * (p - 1.0) / (2.0 * (p + 1.0)) * f.lp1 - c6 * f.l6;
    f.S_omega = f.E + 0.5 * mass;
    f.N_omega = f.grad_l2sq + mass - f.lp1 - c6 * f.l6;
    return f;
}

/// Scaled residuals of the identities satisfied by exact solutions:
/// Nehari N_ω = 0, Pohozaev ½‖∇u‖² + (3/2)ω‖u‖₂² = 3/(p+1)‖u‖_{p+1}^{p+1} + ½‖u‖₆⁶,
/// K = 0 (relative to ‖∇u‖²) and the mass law ω‖u‖₂² = (5-p)/(2(p+1))‖u‖_{p+1}^{p+1}.
inline IdentityResiduals identity_residuals(const FunctionalSet& f, double omega, double p) {
    IdentityResiduals r;
    const double mass = omega == 0.0 ? 0.0 : omega * f.l2sq;
    const double l6 = f.c6 * f.l6;
    r.nehari = f.N_omega / (f.grad_l2sq + mass + f.lp1 + l6);
    const double poho = 0.5 * f.grad_l2sq + 1.5 * mass - 3.0 / (p + 1.0) * f.lp1 - 0.5 * l6;
    r.pohozaev = poho / (0.5 * f.grad_l2sq + 1.5 * mass + 3.0 / (p + 1.0) * f.lp1 + 0.5 * l6);
    r.kfun = f.K / f.grad_l2sq;
    const double rhs = (5.0 - p) / (2.0 * (p + 1.0)) * f.lp1;
    r.mass_law = (mass - rhs) / std::max(std::abs(mass), std::abs(rhs));
    return r;
}

inline IdentityResiduals identity_residuals(const Profile& prof, double omega, double p, double amplitude = 1.0,
                                            const QuadOptions& o = {}, double c6 = 1.0) {
    return identity_residuals(evaluate(prof, omega, p, amplitude, o, c6), omega, p);
}

/// d²/dλ² E(λ^{3/2} u(λ·)) at λ = 1.
inline double fiber_second_derivative(const FunctionalSet& f, double p) {
    return 2.0 * f.grad_l2sq - 9.0 * (p - 1.0) * (p - 1.0) / (4.0 * (p + 1.0)) * f.lp1 - 6.0 * f.c6 * f.l6;
}

/// ⟨L_+ u, u⟩ with L_+ = -Δ + ω - p u^{p-1} - 5u⁴.
inline double linearized_form_on_u(const FunctionalSet& f, double omega, double p) {
    return f.grad_l2sq + omega * f.l2sq - p * f.lp1 - 5.0 * f.c6 * f.l6;
}

}  // namespace dpnls
