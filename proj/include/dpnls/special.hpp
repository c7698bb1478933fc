#pragma once

// Small special-function helpers shared by the quadrature and reference modules.

#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "dpnls/errors.hpp"

namespace dpnls::special {

inline constexpr double pi = std::numbers::pi;

/// Upper incomplete gamma Γ(s, x) for any real s and x > 0.
/// Boost only covers s > 0, so s <= 0 is lifted with Γ(s+1,x) = sΓ(s,x) + x^s e^{-x}.
inline double upper_gamma(double s, double x) {
    if (!(x > 0.0)) throw InvalidArgument("upper_gamma: x must be positive");
    if (s > 0.0) return boost::math::tgamma(s, x);
    int lift = 0;
    double top = s;
    while (top <= 0.0 && std::abs(top) > 1e-14) {
        top += 1.0;
        ++lift;
    }
    double g;
    if (std::abs(top) <= 1e-14) {
        g = boost::math::expint(1, x);  // Γ(0, x) = E1(x)
    } else {
        g = boost::math::tgamma(top, x);
    }
    // Walk back down: Γ(t-1, x) = (Γ(t, x) - x^{t-1} e^{-x}) / (t-1).
    for (int k = 0; k < lift; ++k) {
        const double t = top - k;
        g = (g - std::pow(x, t - 1.0) * std::exp(-x)) / (t - 1.0);
    }
    return g;
}

/// 5-point Gauss–Legendre rule on [0, 1].
struct GaussLegendre5 {
    static constexpr std::array<double, 5> nodes = {
        0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155, 0.95308992296933200};
    static constexpr std::array<double, 5> weights = {
        0.11846344252809454, 0.23931433524968324, 0.28444444444444444, 0.23931433524968324,
        0.11846344252809454};
};

}  // namespace dpnls::special
