#pragma once

// Radial spectrum of L_+ = -Δ + ω - p u^{p-1} - 5u⁴. After v = r·φ this is the half-line operator
// -v'' + V v with Dirichlet conditions at 0 and R. Work is done in amplitude-normalized units
// (ρ = M² r), where L_+ = M⁴(-Δ_ρ + a - p b w^{p-1} - 5w⁴), so physical eigenvalues are M⁴ times
// the normalized ones.
//
// Discretization: continuous Galerkin with Gauss–Lobatto–Legendre elements of order P on element
// boundaries r_j = L·sinh(j·Δξ). The generalized problem K x = λ B x is banded (bandwidth P); the
// number of eigenvalues below σ is the number of negative pivots of the LDLᵀ factors of K - σB.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "dpnls/errors.hpp"
#include "dpnls/ode.hpp"
#include "dpnls/shooting.hpp"

namespace dpnls {

struct PotentialProfile {
    std::shared_ptr<const std::function<double(double)>> V;
    double R = 0.0;            ///< Dirichlet truncation radius
    double length = 1.0;       ///< core length scale for the graded mesh
    double v_inf = 0.0;        ///< limit of V at infinity
    double tol_zero = 0.0;     ///< eigenvalues in (-tol_zero, tol_zero) count as zero
    double scale = 1.0;        ///< physical eigenvalue = scale · computed eigenvalue
    double p = 0.0;

    double operator()(double r) const { return (*V)(r); }
};

struct SpectralOptions {
    int n = 512;                ///< degrees of freedom (elements = n / order)
    int order = 8;
    int k = 4;                  ///< eigenvalues to report
    double R = 0.0;             ///< normalized truncation radius; 0 selects R_factor / √a
    double R_factor = 40.0;
    double tol_zero_rel = 1e-6; ///< tol_zero = tol_zero_rel · a
    bool certificate = true;    ///< recompute on (2n, R) and (n, 1.5R)
    double certificate_rel = 0.2;
};

namespace detail {

inline double legendre(int n, double x, double* dp = nullptr) {
    double p0 = 1.0, p1 = x;
    if (n == 0) {
        if (dp) *dp = 0.0;
        return 1.0;
    }
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if (dp) *dp = (std::abs(x) < 1.0) ? n * (x * p1 - p0) / (x * x - 1.0) : 0.5 * n * (n + 1.0) * std::pow(x, n + 1);
    return p1;
}

/// Gauss–Lobatto–Legendre nodes of degree P on [-1, 1] (ascending).
inline std::vector<double> gll_nodes(int P) {
    std::vector<double> x(static_cast<std::size_t>(P) + 1);
    for (int i = 0; i <= P; ++i) x[static_cast<std::size_t>(i)] = -std::cos(special::pi * i / P);
    // Newton on (1 - x²) P_P'(x) via the standard recurrence in Vandermonde form.
    for (int it = 0; it < 100; ++it) {
        double change = 0.0;
        for (int i = 1; i < P; ++i) {
            double& xi = x[static_cast<std::size_t>(i)];
            const double pn = legendre(P, xi), pm = legendre(P - 1, xi);
            const double dx = (xi * pn - pm) / ((P + 1) * pn);
            xi -= dx;
            change = std::max(change, std::abs(dx));
        }
        if (change < 1e-16) break;
    }
    return x;
}

/// Gauss–Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(static_cast<std::size_t>(n), 0.0);
    w.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(special::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double pn = legendre(n, z, &dp);
            const double dz = pn / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        legendre(n, z, &dp);
        x[static_cast<std::size_t>(n - 1 - i)] = z;
        w[static_cast<std::size_t>(n - 1 - i)] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

/// Symmetric band matrix, lower storage: band[d][i] = A(i + d, i).
struct BandMatrix {
    int n = 0;
    int bw = 0;
    std::vector<std::vector<double>> band;

    BandMatrix(int n_, int bw_) : n(n_), bw(bw_), band(static_cast<std::size_t>(bw_) + 1, std::vector<double>(n_, 0.0)) {}
    double& at(int i, int j) { return band[static_cast<std::size_t>(i - j)][static_cast<std::size_t>(j)]; }
    double get(int i, int j) const {
        if (i < j) std::swap(i, j);
        if (i - j > bw) return 0.0;
        return band[static_cast<std::size_t>(i - j)][static_cast<std::size_t>(j)];
    }
};

/// LDLᵀ of a symmetric band matrix without pivoting (inertia by Sylvester's law).
struct BandLDL {
    int n = 0, bw = 0;
    std::vector<std::vector<double>> L;  ///< L[d][j] = L(j + d, j)
    std::vector<double> D;

    explicit BandLDL(const BandMatrix& A) : n(A.n), bw(A.bw), L(A.band), D(static_cast<std::size_t>(A.n)) {
        const double tiny = 1e-300;
        for (int j = 0; j < n; ++j) {
            double d = L[0][static_cast<std::size_t>(j)];
            for (int k = std::max(0, j - bw); k < j; ++k) {
                const double ljk = L[static_cast<std::size_t>(j - k)][static_cast<std::size_t>(k)];
                d -= ljk * ljk * D[static_cast<std::size_t>(k)];
            }
            if (d == 0.0) d = tiny;
            D[static_cast<std::size_t>(j)] = d;
            for (int i = j + 1; i <= std::min(n - 1, j + bw); ++i) {
                double s = L[static_cast<std::size_t>(i - j)][static_cast<std::size_t>(j)];
                for (int k = std::max(0, i - bw); k < j; ++k)
                    s -= L[static_cast<std::size_t>(i - k)][static_cast<std::size_t>(k)] *
                         L[static_cast<std::size_t>(j - k)][static_cast<std::size_t>(k)] * D[static_cast<std::size_t>(k)];
                L[static_cast<std::size_t>(i - j)][static_cast<std::size_t>(j)] = s / d;
            }
        }
    }

    int negative_pivots() const {
        return static_cast<int>(std::count_if(D.begin(), D.end(), [](double d) { return d < 0.0; }));
    }

    std::vector<double> solve(std::vector<double> y) const {
        for (int i = 0; i < n; ++i)
            for (int k = std::max(0, i - bw); k < i; ++k)
                y[static_cast<std::size_t>(i)] -= L[static_cast<std::size_t>(i - k)][static_cast<std::size_t>(k)] * y[static_cast<std::size_t>(k)];
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] /= D[static_cast<std::size_t>(i)];
        for (int i = n - 1; i >= 0; --i)
            for (int k = i + 1; k <= std::min(n - 1, i + bw); ++k)
                y[static_cast<std::size_t>(i)] -= L[static_cast<std::size_t>(k - i)][static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(k)];
        return y;
    }
};

inline std::vector<double> band_multiply(const BandMatrix& A, const std::vector<double>& x) {
    std::vector<double> y(x.size(), 0.0);
    for (int j = 0; j < A.n; ++j) {
        y[static_cast<std::size_t>(j)] += A.band[0][static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
        for (int d = 1; d <= A.bw && j + d < A.n; ++d) {
            const double a = A.band[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(j + d)] += a * x[static_cast<std::size_t>(j)];
            y[static_cast<std::size_t>(j)] += a * x[static_cast<std::size_t>(j + d)];
        }
    }
    return y;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace detail

/// Galerkin discretization of -v'' + V v on [0, R] with v(0) = v(R) = 0.
class HalfLineOperator {
public:
    HalfLineOperator(const PotentialProfile& pot, int n_elem, int order)
        : order_(order), K_(1, 1), B_(1, 1) {
        if (order < 1 || n_elem < 2) throw InvalidArgument("spectral grid needs order >= 1 and at least 2 elements");
        if (!(pot.R > 0.0) || !pot.V) throw InvalidArgument("potential profile without domain");
        const int P = order;
        const double L = std::min(pot.length, pot.R);
        const double xi_max = std::asinh(pot.R / L);
        std::vector<double> bounds(static_cast<std::size_t>(n_elem) + 1);
        for (int j = 0; j <= n_elem; ++j) bounds[static_cast<std::size_t>(j)] = L * std::sinh(xi_max * j / n_elem);
        bounds.back() = pot.R;

        const std::vector<double> gll = detail::gll_nodes(P);
        std::vector<double> gx, gw;
        detail::gauss_legendre(P + 4, gx, gw);
        // Lagrange basis on the GLL nodes, evaluated at the Gauss points (barycentric form).
        const std::size_t nb = gll.size(), nq = gx.size();
        std::vector<double> bw(nb, 1.0);
        for (std::size_t i = 0; i < nb; ++i)
            for (std::size_t j = 0; j < nb; ++j)
                if (i != j) bw[i] /= (gll[i] - gll[j]);
        std::vector<std::vector<double>> phi(nq, std::vector<double>(nb)), dphi(nq, std::vector<double>(nb));
        for (std::size_t q = 0; q < nq; ++q) {
            const double x = gx[q];
            for (std::size_t i = 0; i < nb; ++i) {
                double prod = 1.0, dsum = 0.0;
                for (std::size_t j = 0; j < nb; ++j) {
                    if (j == i) continue;
                    prod *= (x - gll[j]) / (gll[i] - gll[j]);
                }
                for (std::size_t m = 0; m < nb; ++m) {
                    if (m == i) continue;
                    double term = 1.0 / (gll[i] - gll[m]);
                    for (std::size_t j = 0; j < nb; ++j)
                        if (j != i && j != m) term *= (x - gll[j]) / (gll[i] - gll[j]);
                    dsum += term;
                }
                phi[q][i] = prod;
                dphi[q][i] = dsum;
            }
        }

        const int n_glob = n_elem * P + 1;
        n_ = n_glob - 2;  // Dirichlet at both ends
        K_ = detail::BandMatrix(n_, P);
        B_ = detail::BandMatrix(n_, P);
        r_.resize(static_cast<std::size_t>(n_));
        v_min_ = std::numeric_limits<double>::infinity();
        v_max_ = -std::numeric_limits<double>::infinity();
        for (int e = 0; e < n_elem; ++e) {
            const double r0 = bounds[static_cast<std::size_t>(e)], r1 = bounds[static_cast<std::size_t>(e) + 1];
            const double h = r1 - r0;
            std::vector<double> Vq(nq);
            for (std::size_t q = 0; q < nq; ++q) {
                Vq[q] = pot(r0 + 0.5 * h * (gx[q] + 1.0));
                v_min_ = std::min(v_min_, Vq[q]);
                v_max_ = std::max(v_max_, Vq[q]);
            }
            for (int i = 0; i <= P; ++i) {
                const int gi = e * P + i - 1;
                if (gi >= 0 && gi < n_) r_[static_cast<std::size_t>(gi)] = r0 + 0.5 * h * (gll[static_cast<std::size_t>(i)] + 1.0);
                for (int j = 0; j <= i; ++j) {
                    const int gj = e * P + j - 1;
                    if (gi < 0 || gj < 0 || gi >= n_ || gj >= n_) continue;
                    double kij = 0.0, mij = 0.0;
                    for (std::size_t q = 0; q < nq; ++q) {
                        const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
                        kij += gw[q] * (dphi[q][ui] * dphi[q][uj] * 2.0 / h + Vq[q] * phi[q][ui] * phi[q][uj] * 0.5 * h);
                        mij += gw[q] * phi[q][ui] * phi[q][uj] * 0.5 * h;
                    }
                    K_.at(gi, gj) += kij;
                    B_.at(gi, gj) += mij;
                }
            }
        }
    }

    int size() const { return n_; }
    double potential_min() const { return v_min_; }
    double potential_max() const { return v_max_; }
    const std::vector<double>& nodes() const { return r_; }

    /// Number of eigenvalues strictly below sigma.
    int count_below(double sigma) const { return detail::BandLDL(shifted(sigma)).negative_pivots(); }

    /// i-th eigenvalue (1-based) by bisection on the inertia count, to relative width rel_tol
    /// (absolute floor abs_tol).
    double eigenvalue(int i, double rel_tol = 1e-13, double abs_tol = 0.0) const {
        if (i < 1 || i > n_) throw InvalidArgument("eigenvalue index out of range");
        double lo = v_min_ - 1.0 - std::abs(v_min_);
        double hi = std::max(1.0, std::abs(v_max_));
        for (int g = 0; count_below(hi) < i; ++g) {
            if (g > 200) throw ConvergenceFailure("no upper bound for the requested eigenvalue");
            hi = 2.0 * hi + 1.0;
        }
        for (int it = 0; it < 2000; ++it) {
            const double width = hi - lo;
            if (width <= rel_tol * std::max(std::abs(lo), std::abs(hi)) || width <= abs_tol) break;
            double mid;
            if (lo < 0.0 && hi > 0.0) {
                mid = 0.0;
                if (count_below(0.0) >= i) {
                    hi = 0.0;
                } else {
                    lo = 0.0;
                }
                // Zero is now an endpoint; continue with magnitude bisection.
                continue;
            }
            if (lo >= 0.0 && lo > 0.0 && hi / lo > 4.0) {
                mid = std::sqrt(lo * hi);
            } else if (hi <= 0.0 && hi < 0.0 && lo / hi > 4.0) {
                mid = -std::sqrt(lo * hi);
            } else if (lo == 0.0 && hi > 1e-300) {
                mid = hi * 1e-3;
            } else if (hi == 0.0 && lo < -1e-300) {
                mid = lo * 1e-3;
            } else {
                mid = 0.5 * (lo + hi);
            }
            if (!(mid > lo && mid < hi)) break;
            if (count_below(mid) >= i) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return 0.5 * (lo + hi);
    }

    /// Eigenvector for a computed eigenvalue by inverse iteration (B-normalized).
    std::vector<double> eigenvector(double lambda) const {
        const double shift = lambda - 1e-9 * std::max(std::abs(lambda), 1e-300);
        const detail::BandLDL f(shifted(shift));
        std::vector<double> x(static_cast<std::size_t>(n_), 1.0);
        for (int it = 0; it < 6; ++it) {
            x = f.solve(detail::band_multiply(B_, x));
            const double nrm = std::sqrt(detail::dot(x, detail::band_multiply(B_, x)));
            for (double& v : x) v /= nrm;
        }
        return x;
    }

    double rayleigh_quotient(const std::vector<double>& x) const {
        return detail::dot(x, detail::band_multiply(K_, x)) / detail::dot(x, detail::band_multiply(B_, x));
    }

private:
    detail::BandMatrix shifted(double sigma) const {
        detail::BandMatrix A = K_;
        for (int d = 0; d <= A.bw; ++d)
            for (int j = 0; j + d < A.n; ++j)
                A.band[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)] -=
                    sigma * B_.band[static_cast<std::size_t>(d)][static_cast<std::size_t>(j)];
        return A;
    }

    int order_;
    int n_ = 0;
    detail::BandMatrix K_, B_;
    std::vector<double> r_;
    double v_min_ = 0.0, v_max_ = 0.0;
};

/// V(ρ) = a - p b w^{p-1} - 5w⁴ in normalized units, R = R_factor/√a unless given.
inline PotentialProfile reduce_to_halfline(const SolutionRecord& rec, double R = 0.0, double R_factor = 40.0) {
    if (rec.profile.size() < 2 || !rec.profile.tail) throw InvalidArgument("record without a resolved profile");
    const double a = rec.alpha, b = rec.beta, p = rec.p;
    auto prof = std::make_shared<const Profile>(rec.profile);
    PotentialProfile pot;
    pot.V = std::make_shared<const std::function<double(double)>>([prof, a, b, p](double r) {
        const double w = std::max(prof->value(r), 0.0);
        const double w2 = w * w;
        return a - p * b * std::pow(w, p - 1.0) - 5.0 * w2 * w2;
    });
    pot.R = R > 0.0 ? R : R_factor / std::sqrt(a);
    pot.length = 0.5 * std::min(1.0, 1.0 / std::sqrt(a));
    pot.v_inf = a;
    pot.scale = std::pow(rec.M, 4.0);
    pot.p = p;
    return pot;
}

/// Potential profile from an arbitrary function (test operators, deepened potentials).
inline PotentialProfile make_potential(std::function<double(double)> V, double R, double length, double tol_zero,
                                       double p = 0.0) {
    PotentialProfile pot;
    pot.V = std::make_shared<const std::function<double(double)>>(std::move(V));
    pot.R = R;
    pot.length = length;
    pot.v_inf = (*pot.V)(R);
    pot.tol_zero = tol_zero;
    pot.p = p;
    return pot;
}

/// Zero count of the shooting solution of -v'' + (V - E) v = 0 on (0, R).
inline int oscillation_count(const PotentialProfile& pot, double energy) {
    LinearizedEq eq{pot.p, energy, pot.V};
    return count_oscillations(eq, pot.R).zeros;
}

/// Number of eigenvalues below -tol_zero by both counters; they must agree.
inline int count_negative(const PotentialProfile& pot, double tol_zero, const SpectralOptions& o = {}) {
    const HalfLineOperator op(pot, std::max(2, o.n / o.order), o.order);
    const int inertia = op.count_below(-tol_zero);
    const int osc = oscillation_count(pot, -tol_zero);
    if (inertia != osc) throw CounterMismatch(osc, inertia);
    return inertia;
}

/// k lowest eigenvalues in the potential's own units.
inline std::vector<double> lowest_eigenvalues(const PotentialProfile& pot, int k, const SpectralOptions& o = {}) {
    if (k < 1 || k > 8) throw InvalidArgument("k must lie in [1, 8]");
    const HalfLineOperator op(pot, std::max(2, o.n / o.order), o.order);
    std::vector<double> out;
    for (int i = 1; i <= k; ++i) out.push_back(op.eigenvalue(i, 1e-13, 1e-6 * pot.tol_zero));
    return out;
}

struct GapResult {
    double gap = 0.0;  ///< min |λ_i| (potential units)
    bool certified = false;
    bool inconclusive = false;
    std::vector<double> lambda;         ///< base grid
    std::vector<double> lambda_fine;    ///< 2n
    std::vector<double> lambda_wide;    ///< 1.5R
    double change_fine = 0.0;           ///< relative gap change under grid doubling
    double change_wide = 0.0;           ///< relative gap change under R → 1.5R
};

inline double min_abs(const std::vector<double>& v) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : v) m = std::min(m, std::abs(x));
    return m;
}

/// Non-degeneracy gap with the refinement certificate: the gap must be stable within
/// certificate_rel under grid doubling and under R → 1.5R and exceed tol_zero; otherwise it is
/// reported Inconclusive.
inline GapResult nondegeneracy_gap(const PotentialProfile& pot, const SpectralOptions& o = {}) {
    GapResult g;
    g.lambda = lowest_eigenvalues(pot, o.k, o);
    g.gap = min_abs(g.lambda);
    SpectralOptions fine = o;
    fine.n = 2 * o.n;
    g.lambda_fine = lowest_eigenvalues(pot, o.k, fine);
    PotentialProfile wide = pot;
    wide.R = 1.5 * pot.R;
    SpectralOptions wide_o = o;
    wide_o.n = static_cast<int>(std::lround(o.n * std::log(wide.R / wide.length + 1.0) / std::log(pot.R / pot.length + 1.0)));
    g.lambda_wide = lowest_eigenvalues(wide, o.k, wide_o);
    g.change_fine = std::abs(min_abs(g.lambda_fine) - g.gap) / g.gap;
    g.change_wide = std::abs(min_abs(g.lambda_wide) - g.gap) / g.gap;
    g.certified = g.gap > pot.tol_zero && g.change_fine <= o.certificate_rel && g.change_wide <= o.certificate_rel;
    g.inconclusive = !g.certified;
    return g;
}

struct SpectrumSummary {
    int neg_count = 0;
    int oscillation_count = 0;
    int inertia_count = 0;
    std::vector<double> lambda;  ///< physical units, ascending
    double gap0 = 0.0;           ///< physical units
    bool gap_certified = false;
    bool inconclusive = false;
    double R = 0.0;              ///< normalized truncation radius
    int n = 0;
    double refinement_l1 = 0.0;  ///< relative change of λ₁ under grid doubling
    double refinement_l2 = 0.0;
    double rayleigh_rel = 0.0;   ///< |Rayleigh quotient of the ground vector - λ₁| / |λ₁|
    GapResult gap;
};

/// Full spectral analysis of one record.
inline SpectrumSummary analyze_spectrum(const SolutionRecord& rec, const SpectralOptions& o = {}) {
    PotentialProfile pot = reduce_to_halfline(rec, o.R, o.R_factor);
    pot.tol_zero = o.tol_zero_rel * rec.alpha;
    SpectrumSummary s;
    s.R = pot.R;
    s.n = o.n;
    const HalfLineOperator op(pot, std::max(2, o.n / o.order), o.order);
    s.inertia_count = op.count_below(-pot.tol_zero);
    s.oscillation_count = oscillation_count(pot, -pot.tol_zero);
    if (s.inertia_count != s.oscillation_count) throw CounterMismatch(s.oscillation_count, s.inertia_count);
    s.neg_count = s.inertia_count;

    s.gap = nondegeneracy_gap(pot, o);
    for (double l : s.gap.lambda) s.lambda.push_back(pot.scale * l);
    s.gap0 = pot.scale * s.gap.gap;
    s.gap_certified = s.gap.certified;
    s.inconclusive = s.gap.inconclusive;
    s.refinement_l1 = std::abs(s.gap.lambda_fine[0] - s.gap.lambda[0]) / std::abs(s.gap.lambda[0]);
    if (s.gap.lambda.size() > 1)
        s.refinement_l2 = std::abs(s.gap.lambda_fine[1] - s.gap.lambda[1]) / std::abs(s.gap.lambda[1]);

    const std::vector<double> x = op.eigenvector(s.gap.lambda[0]);
    s.rayleigh_rel = std::abs(op.rayleigh_quotient(x) - s.gap.lambda[0]) / std::abs(s.gap.lambda[0]);
    return s;
}

}  // namespace dpnls
