#pragma once

// All positive radial solutions at fixed (p, ω): scan the amplitude M = u(0) on a log grid,
// bisect every Crosses/Rebounds change, assemble SolutionRecords and tag branches.
// The integrated equation is always the normalized one, w(0) = 1 with a = ωM^{-4}, b = M^{p-5}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpnls/bracket.hpp"
#include "dpnls/errors.hpp"
#include "dpnls/functionals.hpp"
#include "dpnls/ode.hpp"
#include "dpnls/parallel.hpp"
#include "dpnls/reference.hpp"

namespace dpnls {

enum class Branch { Small, Large, Unclassified };

inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::Small: return "Small";
        case Branch::Large: return "Large";
        case Branch::Unclassified: return "Unclassified";
    }
    return "?";
}

struct SolutionRecord {
    double p = 0.0;
    double omega = 0.0;
    double M = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    Branch branch = Branch::Unclassified;
    Profile profile;  ///< normalized w with w(0) = 1
    FunctionalSet functionals;  ///< of the physical u(r) = M·w(M²r)
    IdentityResiduals residuals;
    double M_lo = 0.0;
    double M_hi = 0.0;
    double r_split = 0.0;
    double tail_mismatch = 0.0;
    double dist_ustar = std::numeric_limits<double>::quiet_NaN();
    double dist_talenti = std::numeric_limits<double>::quiet_NaN();

    /// Physical profile value u(r) = M·w(M² r).
    double u(double r) const { return M * profile.value(M * M * r); }
};

struct ScanPoint {
    double M = 0.0;
    TrajectoryClass cls = TrajectoryClass::Undecided;
    double event_r = 0.0;
    double u_turn = std::numeric_limits<double>::quiet_NaN();  ///< w at the turning point (Rebounds)
};

struct AmplitudeScan {
    std::vector<ScanPoint> grid;  ///< ordered by M (includes dip-refinement points)
    std::vector<std::pair<double, double>> brackets;
    std::vector<double> undecided;  ///< M values classified Undecided

    bool has_undecided() const { return !undecided.empty(); }
};

struct ScanOptions {
    double M_min = 0.0;  ///< 0 selects the default range
    double M_max = 0.0;
    int n_grid = 256;
    bool refine_dips = true;  ///< search for hidden brackets at local minima of the rebound height
    unsigned jobs = 1;
    IntegrateOptions ode{};
};

struct SolveOptions {
    ScanOptions scan{};
    double bisect_rel = 1e-12;
    QuadOptions quad{};
    double divergence_tol = 1e-8;
    bool window_probe = true;  ///< tag a lone solution by its amplitude trend at ω/4
};

struct SolveResult {
    AmplitudeScan scan;
    std::vector<SolutionRecord> records;  ///< ordered by M
    std::vector<std::string> failures;    ///< brackets that did not yield a record
};

/// Predicted growth exponent of the Large-branch amplitude, M ~ ω^{e(p)} as ω → 0 (p < 3).
inline double large_branch_exponent(double p) {
    if (p >= 2.0) return -1.0 / (6.0 - 2.0 * p);
    return -(3.0 - p) / (2.0 * (p - 1.0));
}

/// Any positive solution has M > (2(p+1)ω/(5-p))^{1/(p-1)}.
inline double amplitude_lower_bound(double p, double omega) {
    return std::pow(2.0 * (p + 1.0) * omega / (5.0 - p), 1.0 / (p - 1.0));
}

/// Default scan range: from the amplitude lower bound to 1e3 times the larger of 1 and the
/// predicted Large-branch amplitude.
inline std::pair<double, double> default_amplitude_range(double p, double omega) {
    const double lo = amplitude_lower_bound(p, omega);
    double est = 1.0;
    if (p < 3.0) est = std::max(est, std::pow(omega, large_branch_exponent(p)));
    est = std::max(est, 10.0 * std::pow(omega, 1.0 / (p - 1.0)));
    return {lo, std::max(1e3 * est, 10.0 * lo)};
}

namespace detail {

inline void check_problem(double p, double omega) {
    if (!(p > 1.0 && p < 5.0)) throw InvalidArgument("p must lie in (1, 5)");
    if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidArgument("omega must be positive");
}

inline OdeSpec normalized_spec(double p, double omega, double M) {
    return NormalizedDoublePower{omega * std::pow(M, -4.0), std::pow(M, p - 5.0), p};
}

inline TraceFn amplitude_trace(double p, double omega, const IntegrateOptions& ode) {
    return [p, omega, ode](double M, bool record) {
        IntegrateOptions local = ode;
        local.record = record;
        return trace(normalized_spec(p, omega, M), 1.0, local);
    };
}

inline ScanPoint scan_point(const TraceFn& fn, double M) {
    const Trajectory t = fn(M, false);
    ScanPoint s;
    s.M = M;
    s.cls = classify(t.outcome);
    s.event_r = t.event_r;
    if (const auto* rb = std::get_if<Rebounds>(&t.outcome)) s.u_turn = rb->u_turn;
    return s;
}

/// Golden-section minimization of log(u_turn) over (lo, hi) in log M; stops at the first Crosses
/// point, which splits the interval into two brackets.
inline std::optional<ScanPoint> search_dip(const TraceFn& fn, double lo, double hi, std::vector<ScanPoint>& seen,
                                           int max_eval = 40) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(lo), b = std::log(hi);
    auto eval = [&](double x) {
        ScanPoint s = scan_point(fn, std::exp(x));
        seen.push_back(s);
        return s;
    };
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    ScanPoint s1 = eval(x1), s2 = eval(x2);
    for (int k = 0; k < max_eval; ++k) {
        if (s1.cls == TrajectoryClass::Crosses) return s1;
        if (s2.cls == TrajectoryClass::Crosses) return s2;
        if (s1.cls != TrajectoryClass::Rebounds || s2.cls != TrajectoryClass::Rebounds) return std::nullopt;
        if (s1.u_turn < s2.u_turn) {
            b = x2;
            x2 = x1;
            s2 = s1;
            x1 = b - g * (b - a);
            s1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            s1 = s2;
            x2 = a + g * (b - a);
            s2 = eval(x2);
        }
        if (b - a < 1e-12) break;
    }
    return std::nullopt;
}

}  // namespace detail

/// Classify the normalized trajectory at every grid amplitude and collect the sign changes.
inline AmplitudeScan scan_amplitudes(double p, double omega, const ScanOptions& o = {}) {
    detail::check_problem(p, omega);
    if (o.n_grid < 64) throw InvalidArgument("n_grid must be at least 64");
    auto [lo, hi] = default_amplitude_range(p, omega);
    if (o.M_min > 0.0) lo = o.M_min;
    if (o.M_max > 0.0) hi = o.M_max;
    if (!(lo > 0.0 && hi > lo)) throw InvalidArgument("M_range must be positive and ordered");

    const TraceFn fn = detail::amplitude_trace(p, omega, o.ode);
    AmplitudeScan scan;
    scan.grid.resize(static_cast<std::size_t>(o.n_grid));
    const double step = std::log(hi / lo) / (o.n_grid - 1);
    parallel_for(scan.grid.size(), o.jobs, [&](std::size_t i) {
        const double M = i + 1 == scan.grid.size() ? hi : lo * std::exp(step * static_cast<double>(i));
        scan.grid[i] = detail::scan_point(fn, M);
    });

    if (o.refine_dips) {
        std::vector<ScanPoint> extra;
        for (std::size_t i = 1; i + 1 < scan.grid.size(); ++i) {
            const ScanPoint &l = scan.grid[i - 1], &c = scan.grid[i], &r = scan.grid[i + 1];
            const bool all_rebound = l.cls == TrajectoryClass::Rebounds && c.cls == TrajectoryClass::Rebounds &&
                                     r.cls == TrajectoryClass::Rebounds;
            if (all_rebound && c.u_turn < l.u_turn && c.u_turn <= r.u_turn)
                detail::search_dip(fn, l.M, r.M, extra);
        }
        scan.grid.insert(scan.grid.end(), extra.begin(), extra.end());
        std::sort(scan.grid.begin(), scan.grid.end(), [](const ScanPoint& a, const ScanPoint& b) { return a.M < b.M; });
    }

    for (std::size_t i = 0; i < scan.grid.size(); ++i) {
        if (scan.grid[i].cls == TrajectoryClass::Undecided) scan.undecided.push_back(scan.grid[i].M);
        if (i > 0 && opposite(scan.grid[i - 1].cls, scan.grid[i].cls))
            scan.brackets.emplace_back(scan.grid[i - 1].M, scan.grid[i].M);
    }
    return scan;
}

/// Bisect one amplitude bracket to a resolved solution and evaluate its functionals.
inline SolutionRecord bisect_solution(double p, double omega, std::pair<double, double> bracket,
                                      const SolveOptions& o = {}) {
    detail::check_problem(p, omega);
    const TraceFn fn = detail::amplitude_trace(p, omega, o.scan.ode);
    const ShootingBracket b = bisect_bracket(fn, bracket.first, bracket.second, o.bisect_rel);
    const double M_mid = std::sqrt(b.lo * b.hi);
    const double kappa = std::sqrt(omega) * std::pow(M_mid, -2.0);
    AssembledProfile ap = assemble_profile(fn, b, kappa, 1.0, o.divergence_tol);

    SolutionRecord rec;
    rec.p = p;
    rec.omega = omega;
    rec.M = ap.x;
    rec.M_lo = b.lo;
    rec.M_hi = b.hi;
    rec.alpha = omega * std::pow(rec.M, -4.0);
    rec.beta = std::pow(rec.M, p - 5.0);
    rec.profile = std::move(ap.profile);
    rec.r_split = ap.r_split;
    rec.tail_mismatch = ap.tail_mismatch;
    rec.functionals = evaluate(rec.profile, omega, p, rec.M, o.quad);
    rec.residuals = identity_residuals(rec.functionals, omega, p);
    return rec;
}

/// sup over a uniform grid on [0, r_max] of |f - g|.
template <class F, class G>
double sup_distance(F&& f, G&& g, double r_max = 10.0, int n = 2001) {
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = r_max * i / (n - 1);
        worst = std::max(worst, std::abs(f(r) - g(r)));
    }
    return worst;
}

/// Distance of the ω-rescaled profile ω^{-1/(p-1)} u(ω^{-1/2} r) to U† on [0, 10].
inline double distance_to_ustar(const SolutionRecord& rec) {
    const auto ustar = solve_ustar(rec.p);
    const double s = std::pow(rec.omega, -1.0 / (rec.p - 1.0)) * rec.M;
    const double k = rec.M * rec.M / std::sqrt(rec.omega);
    return sup_distance([&](double r) { return s * rec.profile.value(k * r); },
                        [&](double r) { return ustar->profile.value(r); });
}

/// Distance of the amplitude-normalized profile w to W on [0, 10].
inline double distance_to_talenti(const SolutionRecord& rec) {
    return sup_distance([&](double r) { return rec.profile.value(r); }, [](double r) { return talenti_value(r); });
}

/// Tag records at one (p, ω): Small = nearer U† after ω-rescaling, Large = nearer W after
/// amplitude normalization. Equal distances leave the record Unclassified.
inline void classify_branch(std::vector<SolutionRecord>& recs) {
    for (auto& r : recs) {
        r.dist_ustar = distance_to_ustar(r);
        r.dist_talenti = distance_to_talenti(r);
    }
    auto tie = [](const SolutionRecord& r) {
        return std::abs(r.dist_ustar - r.dist_talenti) <= 1e-9 * std::max(r.dist_ustar, r.dist_talenti);
    };
    if (recs.size() == 1) {
        auto& r = recs.front();
        r.branch = tie(r) ? Branch::Unclassified : (r.dist_ustar < r.dist_talenti ? Branch::Small : Branch::Large);
        return;
    }
    for (auto& r : recs) r.branch = Branch::Unclassified;
    if (recs.empty()) return;
    auto small = std::min_element(recs.begin(), recs.end(),
                                  [](const auto& a, const auto& b) { return a.dist_ustar < b.dist_ustar; });
    auto large = std::min_element(recs.begin(), recs.end(),
                                  [](const auto& a, const auto& b) { return a.dist_talenti < b.dist_talenti; });
    if (small == large) {
        // Both references prefer one record (close to the fold): fall back to amplitude order.
        auto by_m = std::minmax_element(recs.begin(), recs.end(), [](const auto& a, const auto& b) { return a.M < b.M; });
        small = by_m.first;
        large = by_m.second;
    }
    if (!tie(*small)) small->branch = Branch::Small;
    if (!tie(*large)) large->branch = Branch::Large;
}

namespace detail {

/// A lone solution is tagged by the defining property of the branches: Small when the amplitude
/// does not grow as ω decreases (probe at ω/4), Large when it does. The probe amplitude is the
/// nearest bracket's midpoint. Without a probe bracket the distance-based tag stays.
inline void tag_by_amplitude_trend(SolutionRecord& rec, const SolveOptions& o) {
    ScanOptions so = o.scan;
    so.M_min = so.M_max = 0.0;
    const AmplitudeScan probe = scan_amplitudes(rec.p, 0.25 * rec.omega, so);
    double best = std::numeric_limits<double>::infinity(), M_probe = 0.0;
    for (const auto& b : probe.brackets) {
        const double m = std::sqrt(b.first * b.second);
        const double d = std::abs(std::log(m / rec.M));
        if (d < best) {
            best = d;
            M_probe = m;
        }
    }
    if (M_probe > 0.0) rec.branch = M_probe <= rec.M ? Branch::Small : Branch::Large;
}

}  // namespace detail

/// Scan, bisect every bracket, classify. Undecided scan points are reported, never bracketed.
inline SolveResult find_solutions(double p, double omega, const SolveOptions& o = {}) {
    SolveResult res;
    res.scan = scan_amplitudes(p, omega, o.scan);
    std::vector<std::optional<SolutionRecord>> slots(res.scan.brackets.size());
    std::vector<std::string> errs(res.scan.brackets.size());
    parallel_for(slots.size(), o.scan.jobs, [&](std::size_t i) {
        try {
            slots[i] = bisect_solution(p, omega, res.scan.brackets[i], o);
        } catch (const Error& e) {
            errs[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) res.records.push_back(std::move(*slots[i]));
        if (!errs[i].empty()) res.failures.push_back(errs[i]);
    }
    classify_branch(res.records);
    if (res.records.size() == 1 && o.window_probe) detail::tag_by_amplitude_trend(res.records.front(), o);
    return res;
}

}  // namespace dpnls
