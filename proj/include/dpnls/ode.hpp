#pragma once

// Radial profile ODEs: u'' + (k/r) u' = A u - B w(r) u^p - C u^5, integrated from a
// regular (or mildly singular) center with a series start, adaptive Dormand–Prince 5(4)
// stepping, dense output and event classification.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dpnls/errors.hpp"

namespace dpnls {

/// -w'' - (2/r)w' + a w - b w^p - w^5 = 0, w(0) = 1 (amplitude-normalized profile).
struct NormalizedDoublePower {
    double a = 0.0;
    double b = 0.0;
    double p = 3.0;
};

/// Small-branch limit: -w'' - (2/r)w' - w^p - M10^{5-p} w^5 = 0.
struct SmallBranchLimit {
    double p = 3.0;
    double m10 = 0.0;
};

/// -u'' - (2/r)u' + u - u^p = 0 (the single-power ground state equation with unit frequency).
struct UStarEq {
    double p = 3.0;
};

/// v'' - v + s^{1-p} v^p = 0 on the half line, v'(0) = 0. Requires 1 < p < 2.
struct SingularVEq {
    double p = 1.5;
};

/// -v'' + (V(r) - E) v = 0 with v(0) = 0, v'(0) = 1 (radial linearized operator after v = r·φ).
struct LinearizedEq {
    double p = 3.0;
    double energy = 0.0;
    std::shared_ptr<const std::function<double(double)>> potential;
};

using OdeSpec = std::variant<NormalizedDoublePower, SmallBranchLimit, UStarEq, SingularVEq, LinearizedEq>;

inline std::string spec_kind(const OdeSpec& spec) {
    struct V {
        std::string operator()(const NormalizedDoublePower&) const { return "NormalizedDoublePower"; }
        std::string operator()(const SmallBranchLimit&) const { return "SmallBranchLimit"; }
        std::string operator()(const UStarEq&) const { return "UStarEq"; }
        std::string operator()(const SingularVEq&) const { return "SingularVEq"; }
        std::string operator()(const LinearizedEq&) const { return "LinearizedEq"; }
    };
    return std::visit(V{}, spec);
}

/// Coefficients of the nonlinear profile equations in the common form
/// u'' = -(k/r) u' + A u - B·weight(r)·u^p - C u^5, weight = 1 or r^{1-p}.
struct RadialCoefficients {
    double k = 2.0;
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double p = 3.0;
    bool singular_weight = false;

    double weight(double r) const { return singular_weight ? std::pow(r, 1.0 - p) : 1.0; }

    /// Odd extension of u^p so the right-hand side stays defined just past a crossing.
    static double spow(double u, double p) { return u >= 0.0 ? std::pow(u, p) : -std::pow(-u, p); }

    double source(double r, double u) const {
        const double u2 = u * u;
        return A * u - B * weight(r) * spow(u, p) - C * u2 * u2 * u;
    }

    /// d(source)/du at a regular point.
    double source_du(double r, double u) const {
        return A - p * B * weight(r) * std::pow(std::abs(u), p - 1.0) - 5.0 * C * std::pow(u, 4);
    }

    double second_derivative(double r, double u, double du) const {
        return (r > 0.0 ? -(k / r) * du : 0.0) + source(r, u);
    }
};

inline RadialCoefficients coefficients(const OdeSpec& spec) {
    struct V {
        RadialCoefficients operator()(const NormalizedDoublePower& s) const {
            if (!(s.a >= 0.0) || !(s.b >= 0.0) || !std::isfinite(s.a) || !std::isfinite(s.b))
                throw InvalidArgument("NormalizedDoublePower: a, b must be finite and nonnegative");
            return {2.0, s.a, s.b, 1.0, s.p, false};
        }
        RadialCoefficients operator()(const SmallBranchLimit& s) const {
            return {2.0, 0.0, 1.0, std::pow(s.m10, 5.0 - s.p), s.p, false};
        }
        RadialCoefficients operator()(const UStarEq& s) const { return {2.0, 1.0, 1.0, 0.0, s.p, false}; }
        RadialCoefficients operator()(const SingularVEq& s) const {
            if (!(s.p > 1.0 && s.p < 2.0)) throw InvalidArgument("SingularVEq requires 1 < p < 2");
            return {0.0, 1.0, 1.0, 0.0, s.p, true};
        }
        RadialCoefficients operator()(const LinearizedEq&) const {
            throw InvalidArgument("LinearizedEq is linear; use count_oscillations");
        }
    };
    return std::visit(V{}, spec);
}

/// u(r) ≈ c·e^{-κ r}/r^power beyond the last node.
struct TailModel {
    double c = 0.0;
    double kappa = 0.0;
    double power = 1.0;

    double value(double r) const { return c * std::exp(-kappa * r) * std::pow(r, -power); }
    double deriv(double r) const { return -value(r) * (kappa + power / r); }
};

/// Radial function on strictly increasing nodes starting at r = 0.
struct Profile {
    std::vector<double> r;
    std::vector<double> u;
    std::vector<double> du;
    std::vector<double> ddu;  ///< u'' at the nodes (from the ODE), used for quintic Hermite interpolation
    std::optional<TailModel> tail;
    OdeSpec spec;
    double central = 1.0;
    bool positive_decaying = false;

    std::size_t size() const { return r.size(); }
    double r_end() const { return r.empty() ? 0.0 : r.back(); }

    /// Value and derivative at any radius covered by nodes or tail.
    std::pair<double, double> eval(double x) const;
    double value(double x) const { return eval(x).first; }
    double deriv(double x) const { return eval(x).second; }
    /// u'' from the interpolant (not from the equation), for collocation residuals.
    double second_deriv(double x) const;

    /// Drop nodes beyond `r_cut` (keeps the node at or just below it).
    void truncate(double r_cut) {
        auto it = std::upper_bound(r.begin(), r.end(), r_cut);
        const auto n = static_cast<std::size_t>(std::max<std::ptrdiff_t>(2, it - r.begin()));
        r.resize(n);
        u.resize(n);
        du.resize(n);
        ddu.resize(n);
    }
};

namespace detail {

/// Hermite interpolation on one interval; quintic when both u'' are finite, cubic otherwise.
inline std::pair<double, double> hermite(double r0, double r1, double u0, double u1, double d0, double d1,
                                         double s0, double s1, double x) {
    const double h = r1 - r0;
    const double t = (x - r0) / h;
    if (std::isfinite(s0) && std::isfinite(s1)) {
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
        const double h00 = 1 - 10 * t3 + 15 * t4 - 6 * t5;
        const double h10 = t - 6 * t3 + 8 * t4 - 3 * t5;
        const double h20 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
        const double h01 = 10 * t3 - 15 * t4 + 6 * t5;
        const double h11 = -4 * t3 + 7 * t4 - 3 * t5;
        const double h21 = 0.5 * t3 - t4 + 0.5 * t5;
        const double g00 = -30 * t2 + 60 * t3 - 30 * t4;
        const double g10 = 1 - 18 * t2 + 32 * t3 - 15 * t4;
        const double g20 = t - 4.5 * t2 + 6 * t3 - 2.5 * t4;
        const double g01 = 30 * t2 - 60 * t3 + 30 * t4;
        const double g11 = -12 * t2 + 28 * t3 - 15 * t4;
        const double g21 = 1.5 * t2 - 4 * t3 + 2.5 * t4;
        const double val = h00 * u0 + h10 * h * d0 + h20 * h * h * s0 + h01 * u1 + h11 * h * d1 + h21 * h * h * s1;
        const double der = (g00 * u0 + g10 * h * d0 + g20 * h * h * s0 + g01 * u1 + g11 * h * d1 + g21 * h * h * s1) / h;
        return {val, der};
    }
    const double t2 = t * t, t3 = t2 * t;
    const double val = (2 * t3 - 3 * t2 + 1) * u0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * u1 +
                       (t3 - t2) * h * d1;
    const double der = ((6 * t2 - 6 * t) * u0 + (3 * t2 - 4 * t + 1) * h * d0 + (-6 * t2 + 6 * t) * u1 +
                        (3 * t2 - 2 * t) * h * d1) / h;
    return {val, der};
}

/// Second derivative of the quintic Hermite interpolant (NaN when an end has no finite u'').
inline double hermite_second(double r0, double r1, double u0, double u1, double d0, double d1, double s0, double s1,
                             double x) {
    if (!std::isfinite(s0) || !std::isfinite(s1)) return std::numeric_limits<double>::quiet_NaN();
    const double h = r1 - r0;
    const double t = (x - r0) / h, t2 = t * t, t3 = t2 * t;
    const double k00 = -60 * t + 180 * t2 - 120 * t3;
    const double k10 = -36 * t + 96 * t2 - 60 * t3;
    const double k20 = 1 - 9 * t + 18 * t2 - 10 * t3;
    const double k11 = -24 * t + 84 * t2 - 60 * t3;
    const double k21 = 3 * t - 12 * t2 + 10 * t3;
    return (k00 * (u0 - u1) + k10 * h * d0 + k20 * h * h * s0 + k11 * h * d1 + k21 * h * h * s1) / (h * h);
}

}  // namespace detail

inline double Profile::second_deriv(double x) const {
    if (r.size() < 2 || x < 0.0 || x > r.back()) throw InvalidArgument("Profile::second_deriv outside the nodes");
    auto it = std::upper_bound(r.begin(), r.end(), x);
    std::size_t i = (it == r.begin()) ? 0 : static_cast<std::size_t>(it - r.begin()) - 1;
    if (i + 1 >= r.size()) i = r.size() - 2;
    return detail::hermite_second(r[i], r[i + 1], u[i], u[i + 1], du[i], du[i + 1], ddu[i], ddu[i + 1], x);
}

inline std::pair<double, double> Profile::eval(double x) const {
    if (r.size() < 2) throw InvalidArgument("Profile::eval on an empty profile");
    if (x < 0.0) throw InvalidArgument("Profile::eval: negative radius");
    if (x > r.back()) {
        if (!tail) throw InvalidArgument("Profile::eval: radius beyond profile without tail model");
        return {tail->value(x), tail->deriv(x)};
    }
    auto it = std::upper_bound(r.begin(), r.end(), x);
    std::size_t i = (it == r.begin()) ? 0 : static_cast<std::size_t>(it - r.begin()) - 1;
    if (i + 1 >= r.size()) i = r.size() - 2;
    return detail::hermite(r[i], r[i + 1], u[i], u[i + 1], du[i], du[i + 1], ddu[i], ddu[i + 1], x);
}

// ---------------------------------------------------------------------------------------------
// Dormand–Prince 5(4) with Hairer's continuous extension.

using State = std::array<double, 2>;

struct Dopri5Step {
    double r0 = 0.0, r1 = 0.0;
    State y0{}, y1{}, f0{}, f1{};
    std::array<State, 5> cont{};

    State dense(double x) const {
        const double h = r1 - r0;
        const double th = (x - r0) / h, th1 = 1.0 - th;
        State out{};
        for (int i = 0; i < 2; ++i)
            out[i] = cont[0][i] + th * (cont[1][i] + th1 * (cont[2][i] + th * (cont[3][i] + th1 * cont[4][i])));
        return out;
    }
};

template <class Rhs>
class Dopri5 {
public:
    Dopri5(Rhs rhs, double r, State y, double h, double rtol) : rhs_(std::move(rhs)), r_(r), y_(y), h_(h), rtol_(rtol) {
        f_ = rhs_(r_, y_);
    }

    double r() const { return r_; }
    const State& y() const { return y_; }

    /// Multiply the state (and cached slope) by s; only valid for linear right-hand sides.
    void rescale(double s) {
        for (int i = 0; i < 2; ++i) {
            y_[i] *= s;
            f_[i] *= s;
        }
    }

    /// Take one accepted step, never going beyond r_stop.
    Dopri5Step step(double r_stop) {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                                a65 = -5103.0 / 18656;
        static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                                a76 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                                e6 = 22.0 / 525, e7 = -1.0 / 40;
        static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                                d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                                d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

        for (int attempt = 0; attempt < 200; ++attempt) {
            double h = std::min(h_, r_stop - r_);
            if (h <= 1e-15 * std::abs(r_)) throw IntegrationFailure("step size underflow", r_);
            const State& k1 = f_;
            State y2, y3, y4, y5, y6, y7;
            for (int i = 0; i < 2; ++i) y2[i] = y_[i] + h * a21 * k1[i];
            const State k2 = rhs_(r_ + c2 * h, y2);
            for (int i = 0; i < 2; ++i) y3[i] = y_[i] + h * (a31 * k1[i] + a32 * k2[i]);
            const State k3 = rhs_(r_ + c3 * h, y3);
            for (int i = 0; i < 2; ++i) y4[i] = y_[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
            const State k4 = rhs_(r_ + c4 * h, y4);
            for (int i = 0; i < 2; ++i)
                y5[i] = y_[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
            const State k5 = rhs_(r_ + c5 * h, y5);
            for (int i = 0; i < 2; ++i)
                y6[i] = y_[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
            const double r_new = (h == r_stop - r_) ? r_stop : r_ + h;
            const State k6 = rhs_(r_new, y6);
            for (int i = 0; i < 2; ++i)
                y7[i] = y_[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
            const State k7 = rhs_(r_new, y7);

            State err;
            for (int i = 0; i < 2; ++i)
                err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

            // Error weights: u against |u| and r|u'|, u' against |u'| and |u|/max(r, 1).
            const double umax = std::max(std::abs(y_[0]), std::abs(y7[0]));
            const double dmax = std::max(std::abs(y_[1]), std::abs(y7[1]));
            const double rr = std::max(r_new, std::numeric_limits<double>::min());
            const double sc0 = rtol_ * (umax + 1e-2 * rr * dmax) + std::numeric_limits<double>::min();
            const double sc1 = rtol_ * (dmax + 1e-2 * umax / std::max(rr, 1.0)) + std::numeric_limits<double>::min();
            const double en = std::sqrt(0.5 * ((err[0] / sc0) * (err[0] / sc0) + (err[1] / sc1) * (err[1] / sc1)));

            if (!std::isfinite(en) || !std::isfinite(y7[0]) || !std::isfinite(y7[1])) {
                if (!std::isfinite(y7[0]) || !std::isfinite(y7[1])) {
                    if (h < 1e-12 * std::abs(r_)) throw IntegrationFailure("non-finite state", r_);
                }
                h_ = 0.2 * h;
                continue;
            }
            if (en <= 1.0) {
                Dopri5Step s;
                s.r0 = r_;
                s.r1 = r_new;
                s.y0 = y_;
                s.y1 = y7;
                s.f0 = k1;
                s.f1 = k7;
                for (int i = 0; i < 2; ++i) {
                    const double ydiff = y7[i] - y_[i];
                    const double bspl = h * k1[i] - ydiff;
                    s.cont[0][i] = y_[i];
                    s.cont[1][i] = ydiff;
                    s.cont[2][i] = bspl;
                    s.cont[3][i] = ydiff - h * k7[i] - bspl;
                    s.cont[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
                }
                const double fac = en > 0.0 ? std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0) : 5.0;
                h_ = h * fac;
                r_ = r_new;
                y_ = y7;
                f_ = k7;
                return s;
            }
            h_ = h * std::max(0.2, 0.9 * std::pow(en, -0.2));
        }
        throw IntegrationFailure("step rejected repeatedly", r_);
    }

private:
    Rhs rhs_;
    double r_;
    State y_;
    State f_{};
    double h_;
    double rtol_;
};

// ---------------------------------------------------------------------------------------------
// Shooting classification.

struct Crosses {
    double r = 0.0;
};
struct Rebounds {
    double r = 0.0;
    double u_turn = 0.0;  ///< value at the turning point (rebound depth)
};
struct Decays {
    Profile profile;
};
struct Undecided {
    double r = 0.0;
};

using ShootingOutcome = std::variant<Crosses, Rebounds, Decays, Undecided>;

enum class TrajectoryClass { Crosses, Rebounds, Decays, Undecided };

inline TrajectoryClass classify(const ShootingOutcome& o) { return static_cast<TrajectoryClass>(o.index()); }

inline const char* to_string(TrajectoryClass c) {
    switch (c) {
        case TrajectoryClass::Crosses: return "Crosses";
        case TrajectoryClass::Rebounds: return "Rebounds";
        case TrajectoryClass::Decays: return "Decays";
        case TrajectoryClass::Undecided: return "Undecided";
    }
    return "?";
}

struct IntegrateOptions {
    double rtol = 1e-12;
    double r_max = 0.0;           ///< 0 selects the per-equation default
    double decay_threshold = 1e-8;  ///< relative to the central value
    double rebound_threshold = 0.0;  ///< relative to the central value; 0 = any positive turning point
    double match_slack = 0.05;    ///< relative slack on the logarithmic derivative
    double min_decay_lengths = 3.0;  ///< √a·r needed before exponential decay can be matched
    bool stop_on_decay = false;   ///< stop as soon as decay_match holds (otherwise only checked at r_max)
    bool record = false;          ///< keep the accepted-step nodes
    double start_radius = 0.0;    ///< series start radius; 0 selects the per-equation default
    bool talenti_deviation = true;  ///< integrate w - W while it is small (w(0) = 1, small a + b)

    void validate() const {
        if (!(rtol > 0.0 && rtol <= 1e-3)) throw InvalidArgument("rtol must lie in (0, 1e-3]");
        if (r_max < 0.0) throw InvalidArgument("r_max must be positive");
        if (start_radius < 0.0) throw InvalidArgument("start_radius must be positive");
    }
};

struct DecayMatchOptions {
    double threshold = 1e-8;
    double slack = 0.05;
    double min_decay_lengths = 3.0;
    double central = 1.0;
};

/// Does (u, u') at radius r look like the decaying tail c·e^{-√a r}/r (a > 0)
/// or the algebraic critical tail √3/(central·r) (a = 0)?
inline bool decay_match(double u, double du, double a, double r, const DecayMatchOptions& o = {}) {
    if (!(u > 0.0) || !(du < 0.0) || !(r > 0.0)) return false;
    const double logd = du / u;
    if (a > 0.0) {
        const double k = std::sqrt(a);
        if (k * r < o.min_decay_lengths) return false;
        if (u > o.threshold * o.central) return false;
        const double target = -(k + 1.0 / r);
        return std::abs(logd - target) <= o.slack * std::abs(target);
    }
    const double ru = r * u * o.central / std::sqrt(3.0);
    return std::abs(ru - 1.0) <= o.slack * 0.2 && std::abs(r * logd + 1.0) <= o.slack * 0.2;
}

/// Result of tracing one trajectory: its class plus (optionally) the recorded nodes.
struct Trajectory {
    ShootingOutcome outcome;
    Profile path;
    double event_r = 0.0;
};

namespace detail {

/// Local length scale of the equation at the center (for the series start radius).
inline double center_length(const RadialCoefficients& c, double u0) {
    const double s = std::abs(c.A) + c.p * std::abs(c.B) * std::pow(u0, c.p - 1.0) + 5.0 * std::abs(c.C) * std::pow(u0, 4);
    return 1.0 / std::sqrt(std::max(1.0, s));
}

/// Regular-center series u = u0 + c2 r^2 + c4 r^4 for k = 2.
inline State regular_series(const RadialCoefficients& c, double u0, double r) {
    const double g0 = c.source(0.0, u0);
    const double c2 = g0 / 6.0;
    const double c4 = c.source_du(0.0, u0) * c2 / 20.0;
    return {u0 + c2 * r * r + c4 * r * r * r * r, 2.0 * c2 * r + 4.0 * c4 * r * r * r};
}

/// Series for v'' = v - s^{1-p} v^p, v'(0)=0:
/// v = v0 + v0 s^2/2 - v0^p s^{3-p}/((2-p)(3-p)) + higher fractional terms.
inline State singular_series(double p, double v0, double s) {
    const double q = std::pow(v0, p);
    const double t3 = -q / ((2.0 - p) * (3.0 - p));
    // v'' gets -s^{1-p}·p v0^{p-1}·(t3 s^{3-p}) -> s^{6-2p} term in v
    const double t62 = -p * std::pow(v0, p - 1.0) * t3 / ((6.0 - 2.0 * p) * (5.0 - 2.0 * p));
    // v'' gets t3 s^{3-p} (from v) and -s^{1-p} p v0^{p-1}(v0 s^2/2) -> s^{5-p} term in v
    const double t5 = (t3 - 0.5 * p * q) / ((5.0 - p) * (4.0 - p));
    const double t4 = v0 / 24.0;
    const double v = v0 + 0.5 * v0 * s * s + t3 * std::pow(s, 3.0 - p) + t4 * std::pow(s, 4) +
                     t5 * std::pow(s, 5.0 - p) + t62 * std::pow(s, 6.0 - 2.0 * p);
    const double dv = v0 * s + t3 * (3.0 - p) * std::pow(s, 2.0 - p) + 4.0 * t4 * s * s * s +
                      t5 * (5.0 - p) * std::pow(s, 4.0 - p) + t62 * (6.0 - 2.0 * p) * std::pow(s, 5.0 - 2.0 * p);
    return {v, dv};
}

template <class F>
double bisect_dense(const Dopri5Step& s, F&& g) {
    double lo = s.r0, hi = s.r1;
    double glo = g(s.dense(lo));
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(s.dense(mid));
        if ((gm > 0.0) == (glo > 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Default r_max: max(50, 30/√a) when the linear coefficient is positive, 1e3 for the critical
/// (a = 0) limit, 40 for the one-dimensional singular equation.
inline double default_r_max(const RadialCoefficients& c) {
    if (c.k == 0.0) return 40.0;
    if (c.A > 0.0) return std::max(50.0, 30.0 / std::sqrt(c.A));
    return 1e3;
}

/// Series start radius used for a given equation and central value.
inline double start_radius(const OdeSpec& spec, double central) {
    const auto c = coefficients(spec);
    if (c.singular_weight) return 1e-4;
    return 1e-6 * detail::center_length(c, central);
}

/// Starting state at radius r from the center series.
inline State series_state(const OdeSpec& spec, double central, double r) {
    const auto c = coefficients(spec);
    if (c.singular_weight) return detail::singular_series(c.p, central, r);
    return detail::regular_series(c, central, r);
}

namespace detail {

inline double talenti_w(double r) { return 1.0 / std::sqrt(1.0 + r * r / 3.0); }
inline double talenti_dw(double r) { return -(r / 3.0) * std::pow(1.0 + r * r / 3.0, -1.5); }

/// (W + z)^5 - W^5 without cancellation.
inline double quintic_difference(double W, double z) {
    const double W2 = W * W;
    return z * (5.0 * W2 * W2 + z * (10.0 * W2 * W + z * (10.0 * W2 + z * (5.0 * W + z))));
}

/// State at the end of the deviation phase (or at r_max if the switch never happened).
struct DeviationPhase {
    double r = 0.0;
    State y{};
    double h = 0.0;
    bool reached_r_max = false;
};

/// For w(0) = 1 and small (a, b) the profile is W plus a tiny deviation z that carries the whole
/// shooting signal; integrating w directly would bury it under round-off. Integrate z = w - W until
/// it reaches 1% of W (or of W'), then hand over to the direct form.
template <class Push>
DeviationPhase integrate_deviation(const NormalizedDoublePower& e, double r0, double r_max, double rtol,
                                   Push&& push) {
    const double a = e.a, b = e.b, p = e.p;
    auto rhs = [a, b, p](double r, const State& y) -> State {
        const double W = talenti_w(r);
        const double w = W + y[0];
        const double wp = w > 0.0 ? std::pow(w, p) : 0.0;
        return {y[1], -2.0 / r * y[1] + a * w - b * wp - quintic_difference(W, y[0])};
    };
    const double c2 = (a - b) / 6.0;
    const double c4 = ((a - p * b) * (a - b - 1.0) - 5.0 * (a - b)) / 120.0;
    auto series = [c2, c4](double r) -> State {
        return {c2 * r * r + c4 * r * r * r * r, 2.0 * c2 * r + 4.0 * c4 * r * r * r};
    };
    {
        Dopri5 check(rhs, r0, series(r0), 0.25 * r0, rtol);
        while (check.r() < 2.0 * r0) check.step(2.0 * r0);
        const State ys = series(2.0 * r0);
        const double tiny = std::numeric_limits<double>::min();
        if (std::abs(check.y()[0] - ys[0]) > 1e-9 * std::abs(ys[0]) + tiny ||
            std::abs(check.y()[1] - ys[1]) > 1e-6 * std::abs(ys[1]) + tiny)
            throw SeriesStartError("deviation series start failed its residual check at r=" + std::to_string(2.0 * r0));
    }
    const State z0 = series(r0);
    push(r0, talenti_w(r0) + z0[0], talenti_dw(r0) + z0[1]);
    Dopri5 solver(rhs, r0, z0, 0.5 * r0, rtol);
    DeviationPhase out;
    while (solver.r() < r_max) {
        const Dopri5Step s = solver.step(r_max);
        const double W = talenti_w(s.r1), dW = talenti_dw(s.r1);
        push(s.r1, W + s.y1[0], dW + s.y1[1]);
        if (std::abs(s.y1[0]) > 1e-2 * W || std::abs(s.y1[1]) > 1e-2 * std::abs(dW)) {
            out.r = s.r1;
            out.y = {W + s.y1[0], dW + s.y1[1]};
            out.h = s.r1 - s.r0;
            return out;
        }
    }
    out.r = solver.r();
    out.y = {talenti_w(out.r) + solver.y()[0], talenti_dw(out.r) + solver.y()[1]};
    out.h = 0.0;
    out.reached_r_max = true;
    return out;
}

}  // namespace detail

/// Trace one trajectory and classify it (Crosses / Rebounds / Decays / Undecided).
inline Trajectory trace(const OdeSpec& spec, double central, const IntegrateOptions& opts = {}) {
    opts.validate();
    if (!(central > 0.0) || !std::isfinite(central)) throw InvalidArgument("central value must be positive");
    const RadialCoefficients c = coefficients(spec);
    const double r_max = opts.r_max > 0.0 ? opts.r_max : default_r_max(c);
    const double r0 = opts.start_radius > 0.0 ? opts.start_radius : start_radius(spec, central);

    auto rhs = [&c](double r, const State& y) -> State { return {y[1], c.second_derivative(r, y[0], y[1])}; };

    Trajectory out;
    Profile& path = out.path;
    path.spec = spec;
    path.central = central;
    auto push = [&](double r, double u, double du) {
        if (!opts.record) return;
        path.r.push_back(r);
        path.u.push_back(u);
        path.du.push_back(du);
        double dd;
        if (r == 0.0) {
            dd = c.singular_weight ? -std::numeric_limits<double>::infinity() : c.source(0.0, u) / 3.0;
        } else {
            dd = c.second_derivative(r, u, du);
        }
        path.ddu.push_back(dd);
    };
    push(0.0, central, 0.0);

    const auto* ndp = std::get_if<NormalizedDoublePower>(&spec);
    const bool deviation = opts.talenti_deviation && ndp && central == 1.0 && ndp->a + ndp->b < 0.1;

    double r_start, h_start;
    State y_start;
    if (deviation) {
        const detail::DeviationPhase ph = detail::integrate_deviation(*ndp, r0, r_max, opts.rtol, push);
        r_start = ph.r;
        y_start = ph.y;
        h_start = ph.reached_r_max ? 0.0 : ph.h;
    } else {
        // Residual check of the series start: integrating from r0 to 2·r0 must land on the series.
        const State y0 = series_state(spec, central, r0);
        {
            Dopri5 check(rhs, r0, y0, 0.25 * r0, opts.rtol);
            while (check.r() < 2.0 * r0) check.step(2.0 * r0);
            const State ys = series_state(spec, central, 2.0 * r0);
            const double du_scale = std::abs(ys[1]) + 1e-2 * std::abs(ys[0]) / r0;
            if (std::abs(check.y()[0] - ys[0]) > 1e-9 * std::abs(ys[0]) ||
                std::abs(check.y()[1] - ys[1]) > 1e-6 * du_scale)
                throw SeriesStartError("series start failed its residual check at r=" + std::to_string(2.0 * r0));
        }
        push(r0, y0[0], y0[1]);
        r_start = r0;
        y_start = y0;
        h_start = 0.5 * r0;
    }

    const DecayMatchOptions dm{opts.decay_threshold, opts.match_slack, opts.min_decay_lengths, central};
    const double rebound_floor = opts.rebound_threshold * central;
    const double a_decay = c.k == 0.0 ? 0.0 : c.A;

    double r_end = r_start;
    State y_end = y_start;
    if (r_start < r_max) {
        Dopri5 solver(rhs, r_start, y_start, h_start > 0.0 ? h_start : 0.5 * r0, opts.rtol);
        while (solver.r() < r_max) {
            const Dopri5Step s = solver.step(r_max);
            const double u = s.y1[0], du = s.y1[1];
            if (u <= 0.0) {
                const double rc = detail::bisect_dense(s, [](const State& y) { return y[0]; });
                out.outcome = Crosses{rc};
                out.event_r = rc;
                push(s.r1, u, du);
                return out;
            }
            if (du >= 0.0) {
                const double rt = detail::bisect_dense(s, [](const State& y) { return y[1]; });
                const double ut = s.dense(rt)[0];
                if (ut > rebound_floor) {
                    out.outcome = Rebounds{rt, ut / central};
                    out.event_r = rt;
                    push(s.r1, u, du);
                    return out;
                }
            }
            push(s.r1, u, du);
            if (opts.stop_on_decay && c.k != 0.0 && decay_match(u, du, a_decay, s.r1, dm)) break;
        }
        r_end = solver.r();
        y_end = solver.y();
    }

    const State& y = y_end;
    bool matched;
    if (c.k == 0.0) {
        // v ~ c e^{-s}: logarithmic derivative -1 (unit mass term).
        matched = y[0] > 0.0 && y[1] < 0.0 && std::abs(y[1] / y[0] + std::sqrt(c.A)) <= opts.match_slack;
    } else {
        matched = decay_match(y[0], y[1], a_decay, r_end, dm);
    }
    out.event_r = r_end;
    if (matched) {
        Decays d;
        if (opts.record) {
            d.profile = path;
            d.profile.positive_decaying = true;
            const double rt = d.profile.r_end();
            const double ut = d.profile.u.back();
            if (c.k == 0.0) {
                d.profile.tail = TailModel{ut * std::exp(std::sqrt(c.A) * rt), std::sqrt(c.A), 0.0};
            } else {
                const double kap = std::sqrt(a_decay);
                d.profile.tail = TailModel{ut * rt * std::exp(kap * rt), kap, 1.0};
            }
        }
        out.outcome = std::move(d);
    } else {
        out.outcome = Undecided{r_end};
    }
    return out;
}

/// Classify the trajectory with center value `central` (profile attached when it decays).
inline ShootingOutcome integrate(const OdeSpec& spec, double central, double r_max = 0.0,
                                 IntegrateOptions opts = {}) {
    opts.r_max = r_max;
    opts.record = true;
    return trace(spec, central, opts).outcome;
}

// ---------------------------------------------------------------------------------------------
// Linear oscillation counting for -v'' + (V - E) v = 0.

struct OscillationResult {
    int zeros = 0;
    double v_end = 0.0;
};

/// Number of zeros in (0, R) of the solution with v(0) = 0, v'(0) = 1.
inline OscillationResult count_oscillations(const LinearizedEq& eq, double R, double rtol = 1e-11) {
    if (!eq.potential) throw InvalidArgument("LinearizedEq without potential");
    const auto& V = *eq.potential;
    const double E = eq.energy;
    auto rhs = [&V, E](double r, const State& y) -> State { return {y[1], (V(r) - E) * y[0]}; };
    const double q0 = std::abs(V(0.0) - E);
    const double r0 = 1e-6 / std::sqrt(std::max(1.0, q0));
    const State y0{r0 + (V(0.0) - E) * r0 * r0 * r0 / 6.0, 1.0 + (V(0.0) - E) * r0 * r0 / 2.0};
    Dopri5 solver(rhs, r0, y0, 0.5 * r0, rtol);
    OscillationResult res;
    double prev = y0[0];
    while (solver.r() < R) {
        const Dopri5Step s = solver.step(R);
        const double v = s.y1[0];
        if ((v > 0.0) != (prev > 0.0) && v != 0.0) ++res.zeros;
        if (v != 0.0) prev = v;
        const double mag = std::abs(solver.y()[0]) + std::abs(solver.y()[1]);
        if (mag > 1e100) {
            solver.rescale(1.0 / mag);
            prev /= mag;
        }
    }
    res.v_end = solver.y()[0];
    return res;
}

}  // namespace dpnls
