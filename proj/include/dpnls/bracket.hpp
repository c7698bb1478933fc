#pragma once

// One-parameter shooting: bisection between a Rebounds side and a Crosses side, and
// assembly of the decaying profile from the final bracket.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dpnls/errors.hpp"
#include "dpnls/ode.hpp"

namespace dpnls {

/// Traces the trajectory for shooting parameter x (recording nodes when asked).
using TraceFn = std::function<Trajectory(double x, bool record)>;

struct ShootingBracket {
    double lo = 0.0;
    double hi = 0.0;
    TrajectoryClass class_lo = TrajectoryClass::Undecided;
    TrajectoryClass class_hi = TrajectoryClass::Undecided;
    int iterations = 0;
};

struct AssembledProfile {
    Profile profile;
    double x = 0.0;              ///< shooting parameter of the kept trajectory
    double r_split = 0.0;        ///< radius where the bracket trajectories separate
    double tail_mismatch = 0.0;  ///< relative log-derivative mismatch of the tail model at r_split
};

inline bool opposite(TrajectoryClass a, TrajectoryClass b) {
    using T = TrajectoryClass;
    return (a == T::Crosses && b == T::Rebounds) || (a == T::Rebounds && b == T::Crosses);
}

/// Geometric bisection of a positive parameter until hi/lo - 1 <= rel_width.
/// Both ends must be Crosses/Rebounds of opposite kind. A Decays or Undecided midpoint means the
/// solution is resolved at the integration horizon, so the bracket is shrunk onto it and returned.
inline ShootingBracket bisect_bracket(const TraceFn& trace_fn, double lo, double hi, double rel_width,
                                      int max_iter = 200) {
    if (!(lo > 0.0) || !(hi > lo)) throw InvalidArgument("bisect_bracket: need 0 < lo < hi");
    ShootingBracket b;
    b.lo = lo;
    b.hi = hi;
    b.class_lo = classify(trace_fn(lo, false).outcome);
    b.class_hi = classify(trace_fn(hi, false).outcome);
    if (!opposite(b.class_lo, b.class_hi))
        throw BisectionFailure(std::string("bracket ends are ") + to_string(b.class_lo) + "/" + to_string(b.class_hi));
    while (b.hi / b.lo - 1.0 > rel_width) {
        if (++b.iterations > max_iter) throw BisectionFailure("bisection did not reach the target width");
        const double mid = std::sqrt(b.lo * b.hi);
        if (!(mid > b.lo && mid < b.hi)) break;  // floating-point resolution reached
        const TrajectoryClass c = classify(trace_fn(mid, false).outcome);
        if (c == b.class_lo) {
            b.lo = mid;
        } else if (c == b.class_hi) {
            b.hi = mid;
        } else {
            b.lo = b.hi = mid;
            b.class_lo = b.class_hi = c;
            break;
        }
    }
    return b;
}

namespace detail {

/// Continue a decaying profile beyond its last node by integrating inward from S > R, where the
/// exponential tail model is accurate, and matching the value at R. Inward integration of the
/// decaying solution is stable, unlike outward shooting. Returns the relative jump of u' at R.
inline double extend_decaying_tail(Profile& prof, double kappa, double power, double S) {
    const RadialCoefficients c = coefficients(prof.spec);
    const double R = prof.r_end(), uR = prof.u.back(), dR = prof.du.back();
    // t = S - r runs from 0 to S - R.
    auto rhs = [&c, S](double t, const State& y) -> State {
        const double r = S - t;
        return {-y[1], -c.second_derivative(r, y[0], y[1])};
    };
    const double span = S - R;
    double amp = uR * std::pow(R, power) * std::exp(kappa * R);
    std::vector<double> ts;
    std::vector<State> ys;
    for (int it = 0; it < 30; ++it) {
        const double uS = amp * std::exp(-kappa * S) * std::pow(S, -power);
        const State y0{uS, -uS * (kappa + power / S)};
        ts.assign(1, 0.0);
        ys.assign(1, y0);
        Dopri5 solver(rhs, 0.0, y0, 1e-3 * span, 1e-12);
        while (solver.r() < span) {
            const Dopri5Step s = solver.step(span);
            ts.push_back(s.r1);
            ys.push_back(s.y1);
        }
        const double ratio = uR / ys.back()[0];
        if (!(ratio > 0.0) || !std::isfinite(ratio)) throw BisectionFailure("tail continuation lost positivity");
        amp *= ratio;
        if (std::abs(ratio - 1.0) < 1e-13) break;
    }
    // Rescale the last pass onto the matched amplitude (the tail is nearly linear in amp).
    const double fix = uR / ys.back()[0];
    // A clipped final step can leave a node very close to R; drop it.
    std::size_t first = ts.size() - 1;
    if (first >= 2 && (span - ts[first - 1]) < 0.5 * (ts[first - 1] - ts[first - 2])) --first;
    for (std::size_t k = first; k-- > 0;) {
        const double r = S - ts[k];
        const double u = ys[k][0] * fix, du = ys[k][1] * fix;
        prof.r.push_back(r);
        prof.u.push_back(u);
        prof.du.push_back(du);
        prof.ddu.push_back(c.second_derivative(r, u, du));
    }
    prof.tail = TailModel{prof.u.back() * std::pow(S, power) * std::exp(kappa * S), kappa, power};
    return std::abs(ys.back()[1] * fix - dR) / std::abs(dR);
}

}  // namespace detail

/// Keep the trajectory at the bracket's geometric mid point up to the radius where the two
/// bracket trajectories separate by `divergence_tol` relative. The profile is then continued inward
/// from `tail_lengths`/κ further out and closed with the exponential tail c·e^{-κr}/r^{power}.
/// tail_mismatch is the relative jump of u' where the two pieces meet.
inline AssembledProfile assemble_profile(const TraceFn& trace_fn, const ShootingBracket& b, double kappa,
                                         double power, double divergence_tol = 1e-8, double tail_lengths = 14.0) {
    AssembledProfile out;
    out.x = std::sqrt(b.lo * b.hi);
    Trajectory mid = trace_fn(out.x, true);
    Profile& prof = mid.path;
    if (prof.size() < 3) throw BisectionFailure("kept trajectory has too few nodes");

    double r_split = prof.r_end();
    if (b.lo != b.hi) {
        const Trajectory tlo = trace_fn(b.lo, true);
        const Trajectory thi = trace_fn(b.hi, true);
        const double r_common = std::min({tlo.path.r_end(), thi.path.r_end(), prof.r_end()});
        r_split = r_common;
        for (std::size_t i = 1; i < prof.size(); ++i) {
            const double r = prof.r[i];
            if (r > r_common) break;
            const double d = std::abs(tlo.path.value(r) - thi.path.value(r));
            if (!(prof.u[i] > 0.0) || d > divergence_tol * prof.u[i]) {
                r_split = prof.r[i - 1];
                break;
            }
        }
    }
    // Last node with u > 0 and u' < 0 at or before the split.
    prof.truncate(r_split);
    while (prof.size() > 2 && !(prof.u.back() > 0.0 && prof.du.back() < 0.0)) {
        prof.r.pop_back();
        prof.u.pop_back();
        prof.du.pop_back();
        prof.ddu.pop_back();
    }
    if (!(prof.u.back() > 0.0)) throw BisectionFailure("assembled profile is not positive at the cut");
    out.r_split = prof.r_end();
    if (kappa > 0.0 && tail_lengths > 0.0) {
        out.tail_mismatch = detail::extend_decaying_tail(prof, kappa, power, out.r_split + tail_lengths / kappa);
    } else {
        const double R = prof.r_end(), uR = prof.u.back(), dR = prof.du.back();
        prof.tail = TailModel{uR * std::pow(R, power) * std::exp(kappa * R), kappa, power};
        const double target = kappa + power / R;
        out.tail_mismatch = std::abs(-dR / uR - target) / target;
    }
    prof.positive_decaying = true;
    out.profile = std::move(prof);
    return out;
}

}  // namespace dpnls
