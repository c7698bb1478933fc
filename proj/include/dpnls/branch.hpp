#pragma once

// ω-sweeps along the two branches with continuation, asymptotic coefficient laws, fold
// bracketing, mass slope and pointwise barrier checks.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dpnls/errors.hpp"
#include "dpnls/reference.hpp"
#include "dpnls/shooting.hpp"

namespace dpnls {

/// C_p = (5 - p)‖W‖_{p+1}^{p+1} / (12π(p+1)), the Large-branch constant (2 < p < 3).
inline double c_p(double p) { return (5.0 - p) * talenti_lq_norm(p + 1.0) / (12.0 * special::pi * (p + 1.0)); }

struct BranchRatios {
    double beta_over_sqrt_alpha = 0.0;      ///< β/√α
    double beta_log_over_sqrt_alpha = 0.0;  ///< β|log α|/√α
    double beta_over_alpha_pow = 0.0;       ///< β/α^{(3-p)/2}
    double m_Mp1 = 0.0;                     ///< m·M^{p-1}
    double omega_over_M2p6 = 0.0;           ///< ω/M^{2p-6}
    double omega_over_m_pow = 0.0;          ///< ω/m^{(6-2p)/(p-1)}
    double omega_M2_over_logM2 = 0.0;       ///< ω M²/(log M)²
    double omega_pow_M = 0.0;               ///< ω^{(p-3)/2} M^{1-p}
    double slope_mass = std::numeric_limits<double>::quiet_NaN();  ///< ∂_ω m (interior points only)
};

inline BranchRatios ratios_of(const SolutionRecord& r) {
    const double p = r.p, a = r.alpha, b = r.beta, M = r.M, w = r.omega, m = r.functionals.l2sq;
    BranchRatios q;
    q.beta_over_sqrt_alpha = b / std::sqrt(a);
    q.beta_log_over_sqrt_alpha = b * std::abs(std::log(a)) / std::sqrt(a);
    q.beta_over_alpha_pow = b / std::pow(a, 0.5 * (3.0 - p));
    q.m_Mp1 = m * std::pow(M, p - 1.0);
    q.omega_over_M2p6 = w / std::pow(M, 2.0 * p - 6.0);
    q.omega_over_m_pow = w / std::pow(m, (6.0 - 2.0 * p) / (p - 1.0));
    const double lm = std::log(M);
    q.omega_M2_over_logM2 = w * M * M / (lm * lm);
    q.omega_pow_M = std::pow(w, 0.5 * (p - 3.0)) * std::pow(M, 1.0 - p);
    return q;
}

struct FoldBracket {
    double omega_lo = 0.0;  ///< solutions exist
    double omega_hi = 0.0;  ///< none found
    int count_lo = 0;
    int count_hi = 0;
    bool undecided_inner = false;  ///< Undecided scan points met inside the final bracket
    std::vector<std::pair<double, int>> trace;  ///< (ω, bracket count) in evaluation order
};

struct BranchCurve {
    double p = 0.0;
    Branch branch = Branch::Unclassified;
    std::vector<SolutionRecord> points;  ///< in sweep order (decreasing ω)
    std::vector<BranchRatios> ratios;
    std::optional<FoldBracket> fold;
};

struct SweepOptions {
    SolveOptions solve{};
    double window = 0.35;        ///< half-width in log M of the warm-start window
    int window_points = 9;
};

struct SweepResult {
    BranchCurve small;
    BranchCurve large;
    std::vector<std::string> notes;  ///< rescans and lost points
};

/// Geometric ω list from `start` down to `stop` (inclusive within round-off), ratio 10^{-1/2} by default.
inline std::vector<double> geometric_omegas(double start, double stop, double ratio = 1.0 / std::sqrt(10.0)) {
    if (!(start > 0.0 && stop > 0.0 && stop <= start && ratio > 0.0 && ratio < 1.0))
        throw InvalidArgument("geometric_omegas: need start >= stop > 0 and ratio in (0, 1)");
    std::vector<double> out;
    const int n = static_cast<int>(std::floor(std::log(stop / start) / std::log(ratio) + 1e-9));
    for (int i = 0; i <= n; ++i) out.push_back(start * std::pow(ratio, i));
    return out;
}

namespace detail {

inline double predicted_exponent(double p, Branch b) {
    return b == Branch::Large ? large_branch_exponent(p) : 1.0 / (p - 1.0);
}

/// Opposite-class transition nearest to M_pred among window_points samples in
/// [M_pred e^{-w}, M_pred e^{w}].
inline std::optional<std::pair<double, double>> warm_bracket(double p, double omega, double M_pred, double w, int n,
                                                             const SolveOptions& o) {
    const TraceFn fn = amplitude_trace(p, omega, o.scan.ode);
    std::vector<ScanPoint> pts;
    for (int i = 0; i < n; ++i) pts.push_back(scan_point(fn, M_pred * std::exp(w * (2.0 * i / (n - 1) - 1.0))));
    std::optional<std::pair<double, double>> best;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (!opposite(pts[i].cls, pts[i + 1].cls)) continue;
        const double mid = std::sqrt(pts[i].M * pts[i + 1].M);
        const double d = std::abs(std::log(mid / M_pred));
        if (d < dist) {
            dist = d;
            best = std::make_pair(pts[i].M, pts[i + 1].M);
        }
    }
    return best;
}

inline void finish_curve(BranchCurve& c) {
    c.ratios.clear();
    for (const auto& r : c.points) c.ratios.push_back(ratios_of(r));
}

}  // namespace detail

/// Per interior point: centered nonuniform finite difference of m = ‖u‖₂² in ω.
struct SlopePoint {
    double omega = 0.0;
    double slope = 0.0;
};

inline std::vector<SlopePoint> mass_slope(const std::vector<SolutionRecord>& pts) {
    if (pts.size() < 3) throw InvalidArgument("mass_slope needs at least 3 points");
    std::vector<std::pair<double, double>> om;
    for (const auto& r : pts) om.emplace_back(r.omega, r.functionals.l2sq);
    std::sort(om.begin(), om.end());
    std::vector<SlopePoint> out;
    for (std::size_t i = 1; i + 1 < om.size(); ++i) {
        const double h1 = om[i].first - om[i - 1].first, h2 = om[i + 1].first - om[i].first;
        const double d = -h2 / (h1 * (h1 + h2)) * om[i - 1].second + (h2 - h1) / (h1 * h2) * om[i].second +
                         h1 / (h2 * (h1 + h2)) * om[i + 1].second;
        out.push_back({om[i].first, d});
    }
    return out;
}

inline std::vector<SlopePoint> mass_slope(BranchCurve& c) {
    std::vector<SlopePoint> s = mass_slope(c.points);
    if (c.ratios.size() != c.points.size()) detail::finish_curve(c);
    for (std::size_t i = 0; i < c.points.size(); ++i)
        for (const auto& sp : s)
            if (sp.omega == c.points[i].omega) c.ratios[i].slope_mass = sp.slope;
    return s;
}

/// Continuation along decreasing ω: a full scan at the first ω, then warm brackets around the
/// amplitude predicted by the branch law. A lost bracket triggers one full rescan at that ω;
/// if the branch is still missing the sweep of that branch stops there.
inline SweepResult sweep(double p, const std::vector<double>& omegas, const SweepOptions& o = {}) {
    if (omegas.empty()) throw InvalidArgument("sweep: empty omega list");
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        if (!(omegas[i] > 0.0)) throw InvalidArgument("sweep: omega values must be positive");
        if (i > 0 && !(omegas[i] < omegas[i - 1])) throw InvalidArgument("sweep: omega list must be decreasing");
    }
    SweepResult res;
    res.small.p = res.large.p = p;
    res.small.branch = Branch::Small;
    res.large.branch = Branch::Large;

    const SolveResult first = find_solutions(p, omegas.front(), o.solve);
    for (const auto& r : first.records) {
        if (r.branch == Branch::Small && res.small.points.empty()) res.small.points.push_back(r);
        if (r.branch == Branch::Large && res.large.points.empty()) res.large.points.push_back(r);
    }
    if (first.scan.has_undecided()) res.notes.push_back("undecided scan points at omega=" + std::to_string(omegas.front()));

    for (BranchCurve* c : {&res.small, &res.large}) {
        if (c->points.empty()) continue;
        for (std::size_t i = 1; i < omegas.size(); ++i) {
            const SolutionRecord& prev = c->points.back();
            const double w = omegas[i];
            const double M_pred = prev.M * std::pow(w / prev.omega, detail::predicted_exponent(p, c->branch));
            std::optional<SolutionRecord> next;
            if (auto br = detail::warm_bracket(p, w, M_pred, o.window, o.window_points, o.solve)) {
                try {
                    next = bisect_solution(p, w, *br, o.solve);
                    next->dist_ustar = distance_to_ustar(*next);
                    next->dist_talenti = distance_to_talenti(*next);
                    next->branch = c->branch;
                } catch (const Error& e) {
                    res.notes.push_back(std::string(to_string(c->branch)) + " warm solve failed at omega=" +
                                        std::to_string(w) + ": " + e.what());
                }
            }
            if (!next) {
                res.notes.push_back(std::string(to_string(c->branch)) + " bracket lost at omega=" + std::to_string(w) +
                                    "; full rescan");
                const SolveResult cold = find_solutions(p, w, o.solve);
                for (const auto& r : cold.records)
                    if (r.branch == c->branch) next = r;
            }
            if (!next) {
                res.notes.push_back(std::string(to_string(c->branch)) + " branch not found at omega=" + std::to_string(w));
                break;
            }
            c->points.push_back(std::move(*next));
        }
        detail::finish_curve(*c);
        if (c->points.size() >= 3) mass_slope(*c);
    }
    return res;
}

enum class Law { A, B, C, D_mass, D_omega, D_mass_omega, E, F };

inline const char* law_id(Law l) {
    switch (l) {
        case Law::A: return "a";
        case Law::B: return "b";
        case Law::C: return "c";
        case Law::D_mass: return "d.mass";
        case Law::D_omega: return "d.omega";
        case Law::D_mass_omega: return "d.mass_omega";
        case Law::E: return "e";
        case Law::F: return "f";
    }
    return "?";
}

inline bool law_applies(Law l, double p) {
    switch (l) {
        case Law::A:
        case Law::D_mass:
        case Law::D_omega:
        case Law::D_mass_omega: return p > 2.0 && p < 3.0;
        case Law::B:
        case Law::E: return p == 2.0;
        case Law::C:
        case Law::F: return p > 1.0 && p < 2.0;
    }
    return false;
}

inline std::vector<Law> applicable_laws(double p) {
    std::vector<Law> out;
    for (Law l : {Law::A, Law::B, Law::C, Law::D_mass, Law::D_omega, Law::D_mass_omega, Law::E, Law::F})
        if (law_applies(l, p)) out.push_back(l);
    return out;
}

struct LawSample {
    double omega = 0.0;
    double measured = 0.0;
    double rel_error = 0.0;
};

struct AsymptoticsReport {
    std::string law;
    std::string quantity;
    double target = 0.0;
    std::string provenance;
    std::vector<LawSample> samples;
    double final_error = 0.0;
    bool trend = false;           ///< |error| strictly decreasing along the last 3 points
    bool strictly_decreasing = false;  ///< |error| strictly decreasing along all points
};

enum class Verdict { Pass, Trend, Fail };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "PASS";
        case Verdict::Trend: return "TREND";
        case Verdict::Fail: return "FAIL";
    }
    return "?";
}

/// PASS: final error within tol and trend. TREND: trend only.
inline Verdict triage(const AsymptoticsReport& r, double tol) {
    if (r.trend && r.final_error <= tol) return Verdict::Pass;
    if (r.trend) return Verdict::Trend;
    return Verdict::Fail;
}

/// Target and provenance of a law at exponent p.
inline std::pair<double, std::string> law_target(Law l, double p) {
    switch (l) {
        case Law::A:
            return {12.0 * special::pi * (p + 1.0) / ((5.0 - p) * talenti_lq_norm(p + 1.0)),
                    "12pi(p+1)/((5-p)|W|_{p+1}^{p+1}), Beta closed form of the Talenti norm"};
        case Law::B: return {2.0 / std::sqrt(3.0), "2/sqrt(3)"};
        case Law::C:
        case Law::F: return {theta0(p), "3^{-(p-1)/2} V(0)^{p-1}, V(0) from the singular shooter"};
        case Law::D_mass: return {6.0 * special::pi / c_p(p), "6pi/C_p, C_p from the Talenti norm"};
        case Law::D_omega: return {c_p(p) * c_p(p), "C_p^2, C_p from the Talenti norm"};
        case Law::D_mass_omega:
            return {std::pow(6.0 * special::pi, (2.0 * p - 6.0) / (p - 1.0)) * std::pow(c_p(p), 4.0 / (p - 1.0)),
                    "(6pi)^{(2p-6)/(p-1)} C_p^{4/(p-1)}"};
        case Law::E: return {27.0, "27"};
    }
    throw InvalidArgument("unknown law");
}

inline double law_measure(Law l, const BranchRatios& q) {
    switch (l) {
        case Law::A: return q.beta_over_sqrt_alpha;
        case Law::B: return q.beta_log_over_sqrt_alpha;
        case Law::C: return q.beta_over_alpha_pow;
        case Law::D_mass: return q.m_Mp1;
        case Law::D_omega: return q.omega_over_M2p6;
        case Law::D_mass_omega: return q.omega_over_m_pow;
        case Law::E: return q.omega_M2_over_logM2;
        case Law::F: return q.omega_pow_M;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline const char* law_quantity(Law l) {
    switch (l) {
        case Law::A: return "beta/sqrt(alpha)";
        case Law::B: return "beta|log alpha|/sqrt(alpha)";
        case Law::C: return "beta/alpha^{(3-p)/2}";
        case Law::D_mass: return "m M^{p-1}";
        case Law::D_omega: return "omega/M^{2p-6}";
        case Law::D_mass_omega: return "omega/m^{(6-2p)/(p-1)}";
        case Law::E: return "omega M^2/(log M)^2";
        case Law::F: return "omega^{(p-3)/2} M^{1-p}";
    }
    return "?";
}

/// Measured sequence of a Large-branch law along a curve (at least 4 points).
inline AsymptoticsReport verify_law(const BranchCurve& curve, Law l) {
    if (!law_applies(l, curve.p)) throw InvalidArgument(std::string("law ") + law_id(l) + " does not apply at this p");
    if (curve.points.size() < 4) throw InvalidArgument("verify_law needs a curve with at least 4 points");
    AsymptoticsReport rep;
    rep.law = law_id(l);
    rep.quantity = law_quantity(l);
    std::tie(rep.target, rep.provenance) = law_target(l, curve.p);
    for (const auto& r : curve.points) {
        const double m = law_measure(l, ratios_of(r));
        rep.samples.push_back({r.omega, m, std::abs(m - rep.target) / std::abs(rep.target)});
    }
    rep.final_error = rep.samples.back().rel_error;
    auto decreasing = [&rep](std::size_t from) {
        for (std::size_t i = from + 1; i < rep.samples.size(); ++i)
            if (!(rep.samples[i].rel_error < rep.samples[i - 1].rel_error)) return false;
        return true;
    };
    rep.strictly_decreasing = decreasing(0);
    rep.trend = decreasing(rep.samples.size() >= 3 ? rep.samples.size() - 3 : 0);
    return rep;
}

/// Bracket the fold ω_c: geometric bisection on "the amplitude scan finds a bracket", starting
/// from a window with solutions at omega_lo and none at omega_hi, until omega_hi/omega_lo <= 1 + rel.
inline FoldBracket detect_fold(double p, double omega_lo, double omega_hi, const ScanOptions& so = {},
                               double rel = 0.01) {
    if (!(p > 1.0 && p < 3.0)) throw InvalidArgument("detect_fold: a fold exists only for 1 < p < 3");
    if (!(omega_lo > 0.0 && omega_hi > omega_lo)) throw InvalidArgument("detect_fold: need 0 < omega_lo < omega_hi");
    FoldBracket f;
    auto count = [&](double w, bool* undecided) {
        ScanOptions s = so;
        s.M_min = s.M_max = 0.0;
        const AmplitudeScan sc = scan_amplitudes(p, w, s);
        const int n = static_cast<int>(sc.brackets.size());
        f.trace.emplace_back(w, n);
        if (undecided) *undecided = sc.has_undecided();
        return n;
    };
    f.omega_lo = omega_lo;
    f.omega_hi = omega_hi;
    f.count_lo = count(omega_lo, nullptr);
    f.count_hi = count(omega_hi, nullptr);
    auto trace_text = [&f] {
        std::string s;
        for (const auto& [w, n] : f.trace) s += " (" + std::to_string(w) + "," + std::to_string(n) + ")";
        return s;
    };
    if (f.count_lo == 0 || f.count_hi != 0)
        throw ConvergenceFailure("fold predicate not monotone across the window:" + trace_text());
    while (f.omega_hi / f.omega_lo > 1.0 + rel) {
        const double mid = std::sqrt(f.omega_lo * f.omega_hi);
        bool undecided = false;
        const int n = count(mid, &undecided);
        if (n > 0) {
            f.omega_lo = mid;
            f.count_lo = n;
        } else {
            f.omega_hi = mid;
            f.count_hi = n;
            f.undecided_inner = f.undecided_inner || undecided;
        }
    }
    return f;
}

struct BarrierReport {
    Branch branch = Branch::Unclassified;
    double gamma = 0.0;               ///< γ of the applicable upper barrier
    double gamma_lower_bound = 0.0;   ///< 3(p-1)/(2(p+1)) (Small branch)
    double upper_margin = 0.0;        ///< min over nodes of barrier - w
    double upper_margin_r = 0.0;
    double lower_R0 = 2.0;
    double lower_margin = 0.0;        ///< min over nodes r > R0 of w/comparison - 1
    double lower_margin_r = 0.0;
    double envelope_eps = 0.5;
    double envelope_R = std::numeric_limits<double>::quiet_NaN();  ///< first node satisfying the ε condition
    double envelope_margin = std::numeric_limits<double>::quiet_NaN();
    double half_Y_R2 = std::numeric_limits<double>::quiet_NaN();   ///< start of [R2, 5/√α] with r w e^{√α r}/√3 >= 1/2
    double half_Y_min = std::numeric_limits<double>::quiet_NaN();  ///< min of r w e^{√α r}/√3 on [R2, 5/√α]

    /// Stored node values carry relative precision ~1e-16 and the barriers touch w to fourth order
    /// at the origin, so differences within a few ulps count as contact, not violation.
    static constexpr double contact = 4.0 * std::numeric_limits<double>::epsilon();
    bool upper_ok() const { return upper_margin >= -contact; }
    bool lower_ok() const { return lower_margin >= -contact; }
    bool envelope_ok() const { return !(envelope_margin < -contact); }
};

/// Node-wise barrier checks in amplitude-normalized units (w(0) = 1, equation with α, β).
/// Margins are absolute differences; negative values are violations, with their location.
inline BarrierReport check_barriers(const SolutionRecord& rec, double R0 = 2.0, double eps = 0.5) {
    const Profile& w = rec.profile;
    if (w.size() < 2) throw InvalidArgument("check_barriers: record without profile");
    const double a = rec.alpha, b = rec.beta, p = rec.p, sa = std::sqrt(a);
    BarrierReport rep;
    rep.branch = rec.branch;
    rep.gamma_lower_bound = 3.0 * (p - 1.0) / (2.0 * (p + 1.0));

    // Upper barrier (1 + γ s²/3)^{-1/2}. Large: s = r, γ = 1 - α + β. Small: in the variable
    // s = M^{(5-p)/2} r with α₁ = ω M^{1-p}, γ₁ = 1 - α₁ + M^{5-p}.
    double scale = 1.0;
    if (rec.branch == Branch::Large) {
        rep.gamma = 1.0 - a + b;
    } else {
        const double a1 = rec.omega * std::pow(rec.M, 1.0 - p);
        rep.gamma = 1.0 - a1 + std::pow(rec.M, 5.0 - p);
        scale = std::pow(rec.M, -0.5 * (5.0 - p));
    }
    rep.upper_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double s = w.r[i] * scale;
        const double bar = 1.0 / std::sqrt(1.0 + rep.gamma * s * s / 3.0);
        const double m = bar - w.u[i];
        if (m < rep.upper_margin) {
            rep.upper_margin = m;
            rep.upper_margin_r = w.r[i];
        }
    }

    // Lower comparison with Y(r) = √3 e^{-√α r}/r from R0.
    auto Y = [sa](double r) { return std::sqrt(3.0) * std::exp(-sa * r) / r; };
    rep.lower_R0 = R0;
    rep.lower_margin = std::numeric_limits<double>::infinity();
    const double k0 = w.value(R0) / Y(R0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = w.r[i];
        if (r <= R0) continue;
        // Relative to the comparison function, so the margin stays meaningful in the far tail.
        const double m = w.u[i] / (k0 * Y(r)) - 1.0;
        if (m < rep.lower_margin) {
            rep.lower_margin = m;
            rep.lower_margin_r = r;
        }
    }
    // Beyond the nodes the tail model is proportional to Y itself.
    if (!std::isfinite(rep.lower_margin)) {
        rep.lower_margin = 0.0;
        rep.lower_margin_r = R0;
    }

    // Refined envelope e^{-√((1-ε)α) r}/r from the first node where ε >= (β/α)w^{p-1} + w⁴/α.
    rep.envelope_eps = eps;
    const double se = std::sqrt((1.0 - eps) * a);
    auto Yt = [se](double r) { return std::exp(-se * r) / r; };
    for (std::size_t i = 1; i < w.size(); ++i) {
        const double u = w.u[i];
        if (eps >= (b / a) * std::pow(u, p - 1.0) + std::pow(u, 4.0) / a) {
            rep.envelope_R = w.r[i];
            const double k = u / Yt(w.r[i]);
            rep.envelope_margin = std::numeric_limits<double>::infinity();
            for (std::size_t j = i + 1; j < w.size(); ++j)
                rep.envelope_margin = std::min(rep.envelope_margin, 1.0 - w.u[j] / (k * Yt(w.r[j])));
            break;
        }
    }

    // r w e^{√α r}/√3 >= 1/2 on [R2, 5/√α]: R2 is the smallest node from which it holds throughout.
    if (rec.branch == Branch::Large) {
        const double r_hi = 5.0 / sa;
        double R2 = std::numeric_limits<double>::quiet_NaN(), mn = std::numeric_limits<double>::infinity();
        for (std::size_t i = w.size(); i-- > 1;) {
            const double r = w.r[i];
            if (r > r_hi) continue;
            const double y = r * w.u[i] * std::exp(sa * r) / std::sqrt(3.0);
            if (y < 0.5) break;
            R2 = r;
            mn = std::min(mn, y);
        }
        rep.half_Y_R2 = R2;
        rep.half_Y_min = mn;
    }
    return rep;
}

}  // namespace dpnls
