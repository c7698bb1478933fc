#pragma once

// Reference profiles: the Aubin–Talenti function W (closed form), the ground state U† of
// -Δu + u - u^p = 0 and the solution V of v'' - v + s^{1-p} v^p = 0, v'(0) = 0.

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <utility>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "dpnls/bracket.hpp"
#include "dpnls/errors.hpp"
#include "dpnls/functionals.hpp"
#include "dpnls/ode.hpp"
#include "dpnls/special.hpp"

namespace dpnls {

inline double talenti_value(double r) {
    if (!(r >= 0.0)) throw InvalidArgument("talenti_value: negative radius");
    return 1.0 / std::sqrt(1.0 + r * r / 3.0);
}

inline double talenti_deriv(double r) {
    if (!(r >= 0.0)) throw InvalidArgument("talenti_deriv: negative radius");
    return -(r / 3.0) * std::pow(1.0 + r * r / 3.0, -1.5);
}

inline double talenti_second(double r) {
    if (!(r >= 0.0)) throw InvalidArgument("talenti_second: negative radius");
    const double s = 1.0 + r * r / 3.0;
    return -std::pow(s, -1.5) / 3.0 + (r * r / 3.0) * std::pow(s, -2.5);
}

/// ‖W‖_q^q = 4π·3√3·½B(3/2, (q-3)/2) over R^3.
inline double talenti_lq_norm(double q) {
    if (!(q > 3.0)) throw NonIntegrable("W is not in L^q for q <= 3");
    return 4.0 * special::pi * 3.0 * std::sqrt(3.0) * 0.5 * std::beta(1.5, 0.5 * (q - 3.0));
}

/// Same quantity by tanh-sinh quadrature (cross-check route). With r = √3·tan θ the integrand
/// becomes 3√3·sin²θ·cos^{q-4}θ on [0, π/2], integrable endpoint singularity included.
inline double talenti_lq_norm_quadrature(double q) {
    if (!(q > 3.0)) throw NonIntegrable("W is not in L^q for q <= 3");
    auto f = [q](double th, double th_c) {
        // Near π/2 boost passes th_c = π/2 - th > 0, which keeps cos θ accurate; near 0 th_c < 0.
        const double c = (th_c > 0.0 && th_c < 0.5) ? std::sin(th_c) : std::cos(th);
        const double s = std::sin(th);
        return s * s * std::pow(c, q - 4.0);
    };
    boost::math::quadrature::tanh_sinh<double> ts;
    const double v = ts.integrate(f, 0.0, 0.5 * special::pi, 1e-15);
    return 4.0 * special::pi * 3.0 * std::sqrt(3.0) * v;
}

/// ‖∇W‖² = 4π√3·½B(5/2, 1/2).
inline double talenti_gradient_sq() { return 2.0 * special::pi * std::sqrt(3.0) * std::beta(2.5, 0.5); }

/// Best Sobolev constant σ = (‖W‖₆⁶)^{2/3}.
inline double sigma_constant() { return std::pow(talenti_lq_norm(6.0), 2.0 / 3.0); }

/// W sampled on a graded grid over [0, r_end] with its exact algebraic tail √3/r (to leading order).
inline Profile talenti_profile(double r_end = 1e3, std::size_t n = 4000) {
    Profile prof;
    prof.spec = NormalizedDoublePower{0.0, 0.0, 3.0};
    prof.central = 1.0;
    prof.positive_decaying = true;
    const double smax = std::asinh(r_end);
    for (std::size_t i = 0; i <= n; ++i) {
        const double r = std::sinh(smax * static_cast<double>(i) / static_cast<double>(n));
        prof.r.push_back(r);
        prof.u.push_back(talenti_value(r));
        prof.du.push_back(talenti_deriv(r));
        prof.ddu.push_back(talenti_second(r));
    }
    // Match value at r_end with c/r; the residual relative error is O(1/r_end²).
    prof.tail = TailModel{talenti_value(r_end) * r_end, 0.0, 1.0};
    return prof;
}

enum class ReferenceKind { UStar, SingularV };

struct ReferenceSolution {
    ReferenceKind kind = ReferenceKind::UStar;
    double p = 0.0;
    double central_value = 0.0;
    Profile profile;
    double tol = 0.0;
    double r_split = 0.0;
    double tail_mismatch = 0.0;
};

struct ReferenceOptions {
    double tol = 1e-12;          ///< relative bracket width on the central value
    double rtol = 1e-12;         ///< integrator tolerance
    double start_radius = 0.0;   ///< series start radius (0 = default)
    double central_min = 1e-3;
    double central_max = 1e3;
    int n_scan = 64;
};

namespace detail {

inline ShootingBracket scan_central(const TraceFn& fn, double lo, double hi, int n) {
    const double step = std::log(hi / lo) / (n - 1);
    double prev_x = 0.0;
    TrajectoryClass prev = TrajectoryClass::Undecided;
    for (int i = 0; i < n; ++i) {
        const double x = lo * std::exp(step * i);
        const TrajectoryClass c = classify(fn(x, false).outcome);
        if (i > 0 && opposite(prev, c)) return {prev_x, x, prev, c, 0};
        prev = c;
        prev_x = x;
    }
    throw BracketNotFound("no Rebounds/Crosses transition of the central value in the configured range");
}

inline ReferenceSolution shoot_reference(ReferenceKind kind, double p, const ReferenceOptions& o) {
    OdeSpec spec = kind == ReferenceKind::UStar ? OdeSpec{UStarEq{p}} : OdeSpec{SingularVEq{p}};
    IntegrateOptions io;
    io.rtol = o.rtol;
    io.start_radius = o.start_radius;
    TraceFn fn = [spec, io](double x, bool record) {
        IntegrateOptions local = io;
        local.record = record;
        return trace(spec, x, local);
    };
    // U†(0) > 1 is forced by u''(0) < 0; start the scan there.
    const double lo = kind == ReferenceKind::UStar ? std::max(1.0 + 1e-9, o.central_min) : o.central_min;
    ShootingBracket b = scan_central(fn, lo, o.central_max, o.n_scan);
    b = bisect_bracket(fn, b.lo, b.hi, o.tol);
    AssembledProfile a = assemble_profile(fn, b, 1.0, kind == ReferenceKind::UStar ? 1.0 : 0.0);
    ReferenceSolution s;
    s.kind = kind;
    s.p = p;
    s.central_value = a.x;
    s.profile = std::move(a.profile);
    s.tol = o.tol;
    s.r_split = a.r_split;
    s.tail_mismatch = a.tail_mismatch;
    return s;
}

class ReferenceCache {
public:
    using Key = std::tuple<int, double, double, double>;

    std::shared_ptr<const ReferenceSolution> find(const Key& k) const {
        std::shared_lock lock(mu_);
        auto it = table_.find(k);
        return it == table_.end() ? nullptr : it->second;
    }
    void insert(const Key& k, std::shared_ptr<const ReferenceSolution> v) {
        std::unique_lock lock(mu_);
        table_[k] = std::move(v);
    }

private:
    mutable std::shared_mutex mu_;
    std::map<Key, std::shared_ptr<const ReferenceSolution>> table_;
};

inline ReferenceCache& reference_cache() {
    static ReferenceCache cache;
    return cache;
}

inline std::shared_ptr<const ReferenceSolution> cached_reference(ReferenceKind kind, double p,
                                                                 const ReferenceOptions& o) {
    const ReferenceCache::Key key{static_cast<int>(kind), p, o.tol, o.start_radius};
    if (auto hit = reference_cache().find(key)) return hit;
    auto sol = std::make_shared<const ReferenceSolution>(shoot_reference(kind, p, o));
    reference_cache().insert(key, sol);
    return sol;
}

}  // namespace detail

/// Ground state of -u'' - (2/r)u' + u - u^p = 0. Cached per (p, tolerance).
inline std::shared_ptr<const ReferenceSolution> solve_ustar(double p, const ReferenceOptions& o = {}) {
    if (!(p > 1.0 && p < 5.0)) throw InvalidArgument("solve_ustar: p must lie in (1, 5)");
    return detail::cached_reference(ReferenceKind::UStar, p, o);
}

/// Decaying solution of v'' - v + s^{1-p} v^p = 0, v'(0) = 0. Cached per (p, tolerance, start radius).
inline std::shared_ptr<const ReferenceSolution> solve_singular_v(double p, const ReferenceOptions& o = {}) {
    if (!(p > 1.0 && p < 2.0)) throw InvalidArgument("solve_singular_v: p must lie in (1, 2)");
    return detail::cached_reference(ReferenceKind::SingularV, p, o);
}

/// θ₀ = 3^{-(p-1)/2} V(0)^{p-1}.
inline double theta0(double p, const ReferenceOptions& o = {}) {
    const double v0 = solve_singular_v(p, o)->central_value;
    return std::pow(3.0, -0.5 * (p - 1.0)) * std::pow(v0, p - 1.0);
}

/// Collocation residual of V: on every node interval inside [s_lo, s_hi], the interval average
/// of v'' - v + s^{1-p} v^p, i.e. (v'(s1) - v'(s0))/h - mean(v - s^{1-p} v^p) with 5-point Gauss
/// quadrature on the interpolant. Pointwise v'' from the interpolant is avoided because the third
/// derivative is singular at the origin. Beyond the last node the tail c·e^{-s} leaves s^{1-p} v^p.
inline double singular_v_collocation_residual(const ReferenceSolution& v, double s_lo, double s_hi) {
    const Profile& prof = v.profile;
    auto g = [&v](double s, double val) { return val - std::pow(s, 1.0 - v.p) * std::pow(val, v.p); };
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < prof.size(); ++i) {
        const double s0 = prof.r[i], s1 = prof.r[i + 1], h = s1 - s0;
        if (s0 < s_lo || s1 > s_hi) continue;
        double mean = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            const double s = s0 + h * special::GaussLegendre5::nodes[k];
            mean += special::GaussLegendre5::weights[k] * g(s, prof.value(s));
        }
        worst = std::max(worst, std::abs((prof.du[i + 1] - prof.du[i]) / h - mean));
    }
    if (prof.tail && s_hi > prof.r_end()) {
        const double s = std::max(s_lo, prof.r_end());
        worst = std::max(worst, std::pow(s, 1.0 - v.p) * std::pow(prof.tail->value(s), v.p));
    }
    return worst;
}

}  // namespace dpnls
