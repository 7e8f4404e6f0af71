// counting.hpp: the counting function of the exponents from resolvent corner blocks.
//
//   N(xi) = 1/2 + <tr[z G^B_1n B_n - G^B_n1 C_1 / z]>_phi / (2m),   z = exp(xi + i phi),
//
// where <.>_phi is the uniform average over one period [0, 2 pi / n). The average is
// taken with the periodic trapezoid rule. With N sample angles the rule is exact for
// the rational integrand up to aliasing: 2m N(xi) = sum_a 1 / (1 - q_a) with
// |q_a| = exp(n N (xi_a - xi)). Hence 2m Re N crosses k - 1/2 exactly at an isolated
// exponent, and the crossings of an equal-modulus cluster are placed symmetrically
// about it. locate_exponents relies on both facts.

#pragma once

#include "tmcount/hamiltonian.hpp"

#include <cstdio>
#include <map>
#include <string>
#include <utility>

namespace tmcount {

struct QuadratureSpec {
    int n_phi{64};
    int max_n_phi{1024};        // escalation cap (x4 steps); equal to n_phi disables escalation
    double sample_limit{1e8};   // |integrand| above this marks a sample as near the spectrum

    static QuadratureSpec fixed(int n) { return {n, n, 1e8}; }
};

// Escalate while |2m Re N - count| exceeds this.
inline constexpr double kQuantizationTol = 1e-4;
// A count is ambiguous when the quantization residual exceeds this.
inline constexpr double kAmbiguousResidual = 0.25;

struct CountingFlags {
    bool near_eigenvalue{false};
    bool spectrum_collision{false};
    bool overflow_guard{false};

    bool any() const { return near_eigenvalue || spectrum_collision || overflow_guard; }
};

struct CountingSample {
    double xi{0.0};
    cplx raw{};          // N(xi) including the 1/2 offset
    int count{-1};       // round(2m Re raw), clamped to [0, 2m]
    int n_phi{0};
    double phi_shift{0.0};   // angle grid offset in steps (0.5 after a collision retry)
    CountingFlags flags;
    double residual{0.0};    // |2m Re raw - round(2m Re raw)|
    double max_sample{0.0};  // largest |integrand| seen
    std::string error;       // diagnostic for collision / guard rows
};

enum class CountingMethod { balanced, corner };
enum class CornerFormula { matrix, schur };

// ------------------------------------------------------------ integrands

inline cplx integrand_from_corners(const BlockTridiagonalSystem& sys, const CornerBlocks& g, cplx z) {
    const Index n = sys.n();
    return (z * g.b_1n * sys.B(n - 1)).trace() - (g.b_n1 * sys.C(0)).trace() / z;
}

inline cplx counting_integrand(const BlockTridiagonalSystem& sys, cplx energy, double xi, double phi) {
    const cplx z = std::exp(cplx{xi, phi});
    return integrand_from_corners(sys, resolvent_corners_balanced(sys, energy, z), z);
}

namespace detail {

inline Matrix checked_inverse(const Matrix& x, const char* what) {
    Eigen::PartialPivLU<Matrix> lu(x);
    if (!(lu.rcond() > 1e-14)) throw SpectrumCollision(std::string(what) + " is singular");
    return lu.inverse();
}

}  // namespace detail

// The same trace from the corner blocks g of the open chain, with w = z^n explicit:
//   tr [[-w B_n g_1n - I, -w B_n g_11], [C_1 g_nn / w, C_1 g_n1 / w + I]]^{-1}
// or its block-diagonal Schur form
//   -tr[P - B_n g_11 S^{-1} C_1 g_nn]^{-1} + tr[S - C_1 g_nn P^{-1} B_n g_11]^{-1},
//   P = w B_n g_1n + I,  S = C_1 g_n1 / w + I.
inline cplx corner_integrand(const BlockTridiagonalSystem& sys, const CornerBlocks& g, double xi, double phi,
                             CornerFormula formula = CornerFormula::matrix) {
    const Index n = sys.n(), m = sys.m();
    if (!(static_cast<double>(n) * std::abs(xi) <= kPowerGuard)) {
        throw OverflowGuard("corner path: n |xi| exceeds the z^n range; use the balanced path");
    }
    const cplx w = std::exp(static_cast<double>(n) * cplx{xi, phi});
    const Matrix& bn = sys.B(n - 1);
    const Matrix& c1 = sys.C(0);
    const Matrix id = Matrix::Identity(m, m);
    if (formula == CornerFormula::matrix) {
        // Rows are scaled by D = diag(I / w, I) or diag(I, w I) so the matrix stays O(1); M^{-1} = (D M)^{-1} D.
        const bool large = std::abs(w) >= 1.0;
        const cplx top = large ? 1.0 / w : cplx(1.0), low = large ? cplx(1.0) : w;
        Matrix big(2 * m, 2 * m);
        big << top * (-w * bn * g.b_1n - id), top * (-w * bn * g.b_11), low * (c1 * g.b_nn / w), low * (c1 * g.b_n1 / w + id);
        const Matrix inv = detail::checked_inverse(big, "corner matrix");
        return top * inv.topLeftCorner(m, m).trace() + low * inv.bottomRightCorner(m, m).trace();
    }
    const Matrix p = w * bn * g.b_1n + id;
    const Matrix s = c1 * g.b_n1 / w + id;
    const Matrix bg = bn * g.b_11, cg = c1 * g.b_nn;
    const Matrix top = p - bg * detail::checked_inverse(s, "Schur block S") * cg;
    const Matrix bottom = s - cg * detail::checked_inverse(p, "Schur block P") * bg;
    return -detail::checked_inverse(top, "Schur complement (1,1)").trace() +
           detail::checked_inverse(bottom, "Schur complement (2,2)").trace();
}

// ------------------------------------------------------------ quadrature

namespace detail {

inline std::string at_point(double xi, double phi) {
    char buf[96];
    std::snprintf(buf, sizeof buf, " at xi = %.17g, phi = %.17g", xi, phi);
    return buf;
}

// Trapezoid average over phi_k = (k + shift) 2 pi / (n N); returns (sum / N, max |f|).
template <class F>
std::pair<cplx, double> periodic_average(Index n, int n_phi, double shift, double xi, F&& f) {
    const double step = 2.0 * kPi / (static_cast<double>(n) * n_phi);
    cplx sum{};
    double biggest = 0.0;
    for (int k = 0; k < n_phi; ++k) {
        const double phi = (k + shift) * step;
        cplx v;
        try {
            v = f(phi);
        } catch (const SpectrumCollision& e) {
            throw SpectrumCollision(e.what() + at_point(xi, phi));
        }
        sum += v;
        biggest = std::max(biggest, std::abs(v));
    }
    return {sum / static_cast<double>(n_phi), biggest};
}

template <class F>
CountingSample count_by_quadrature(Index m, Index n, double xi, const QuadratureSpec& quad, F&& f) {
    if (quad.n_phi < 4) throw std::invalid_argument("quadrature: n_phi must be at least 4");
    CountingSample s;
    s.xi = xi;
    const double two_m = 2.0 * static_cast<double>(m);
    int n_phi = quad.n_phi;
    for (;;) {
        std::pair<cplx, double> avg;
        s.phi_shift = 0.0;
        try {
            avg = periodic_average(n, n_phi, 0.0, xi, f);
        } catch (const SpectrumCollision&) {
            s.phi_shift = 0.5;  // one retry on the half-shifted grid
            avg = periodic_average(n, n_phi, 0.5, xi, f);
        }
        s.raw = 0.5 + avg.first / two_m;
        s.max_sample = avg.second;
        s.n_phi = n_phi;
        const double scaled = two_m * s.raw.real();
        const double rounded = std::round(scaled);
        s.residual = std::abs(scaled - rounded);
        s.count = static_cast<int>(std::clamp(rounded, 0.0, two_m));
        const bool clamped = rounded < 0.0 || rounded > two_m;
        s.flags.near_eigenvalue = clamped || !std::isfinite(scaled) || s.residual > kAmbiguousResidual ||
                                  s.max_sample > quad.sample_limit;
        if (s.residual > kQuantizationTol && n_phi * 4 <= quad.max_n_phi) {
            n_phi *= 4;
            continue;
        }
        return s;
    }
}

}  // namespace detail

inline CountingSample counting_function(const BlockTridiagonalSystem& sys, cplx energy, double xi,
                                        const QuadratureSpec& quad = {}) {
    return detail::count_by_quadrature(sys.m(), sys.n(), xi, quad,
                                       [&](double phi) { return counting_integrand(sys, energy, xi, phi); });
}

// Same sample semantics with g = resolvent_corners_open(sys, E) precomputed.
inline CountingSample counting_function_corner(const BlockTridiagonalSystem& sys, double xi, const QuadratureSpec& quad,
                                               const CornerBlocks& g, CornerFormula formula = CornerFormula::matrix) {
    if (g.source != CornerSource::open) throw std::invalid_argument("counting_function_corner: needs open-chain corner blocks");
    if (!(static_cast<double>(sys.n()) * std::abs(xi) <= kPowerGuard)) {
        throw OverflowGuard("counting_function_corner: n |xi| exceeds the z^n range; use the balanced path");
    }
    return detail::count_by_quadrature(sys.m(), sys.n(), xi, quad,
                                       [&](double phi) { return corner_integrand(sys, g, xi, phi, formula); });
}

// |<Im integrand>|; the integral of the imaginary part vanishes on any valid contour.
inline double imaginary_part_check(const BlockTridiagonalSystem& sys, cplx energy, double xi, const QuadratureSpec& quad = {}) {
    const CountingSample s = counting_function(sys, energy, xi, quad);
    return std::abs(2.0 * static_cast<double>(sys.m()) * s.raw.imag());
}

// ------------------------------------------------------------------ sweep

// Per-point failures are recorded in the sample flags; the sweep always continues.
inline std::vector<CountingSample> counting_sweep(const BlockTridiagonalSystem& sys, cplx energy,
                                                  const std::vector<double>& grid, const QuadratureSpec& quad = {},
                                                  CountingMethod method = CountingMethod::balanced) {
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("counting_sweep: grid must be strictly increasing");
    }
    std::vector<CountingSample> out;
    if (grid.empty()) return out;
    std::optional<CornerBlocks> g;
    if (method == CountingMethod::corner) g = resolvent_corners_open(sys, energy);
    out.reserve(grid.size());
    for (double xi : grid) {
        try {
            out.push_back(method == CountingMethod::corner ? counting_function_corner(sys, xi, quad, *g)
                                                           : counting_function(sys, energy, xi, quad));
        } catch (const SpectrumCollision& e) {
            CountingSample s;
            s.xi = xi;
            s.raw = cplx{std::nan(""), std::nan("")};
            s.flags.spectrum_collision = true;
            s.error = e.what();
            out.push_back(std::move(s));
        } catch (const OverflowGuard& e) {
            CountingSample s;
            s.xi = xi;
            s.raw = cplx{std::nan(""), std::nan("")};
            s.flags.overflow_guard = true;
            s.error = e.what();
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ------------------------------------------------------- exponent location

struct LocateOptions {
    double tol{1e-6};
    // Crossings closer than cluster_units / (n N) are treated as one cluster.
    double cluster_units{6.0};
    // Clusters the rational fit cannot separate are re-examined with 4x more angles up
    // to this many, then reported at their centre.
    int max_n_phi{1024};
};

namespace detail {

struct LocatorEval {
    cplx w;        // 2m N(xi)
    bool shifted;  // taken on the half-shifted angle grid
};

class CrossingLocator {
public:
    CrossingLocator(const BlockTridiagonalSystem& sys, cplx energy, double tol, double cluster_units)
        : sys_(sys), energy_(energy), tol_(tol), cluster_units_(cluster_units), two_m_(2 * static_cast<int>(sys.m())) {}

    const LocatorEval& eval(double xi, int n_phi) {
        const auto key = std::make_pair(n_phi, xi);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        LocatorEval v;
        try {
            v = value(xi, n_phi);
        } catch (const SpectrumCollision&) {
            v = value(xi + 0.25 * tol_, n_phi);  // step off a contour through the spectrum
        }
        return memo_.emplace(key, v).first->second;
    }

    double scaled(double xi, int n_phi) { return eval(xi, n_phi).w.real(); }

    double unit(int n_phi) const { return 1.0 / (static_cast<double>(sys_.n()) * n_phi); }

    // Bisection for the crossing of level k - 1/2 down to `width`; requires below(lo), !below(hi).
    std::pair<double, double> crossing(int k, double lo, double hi, int n_phi, double width) {
        // Start from the tightest bracket among earlier evaluations. Samples close to a
        // known crossing are skipped: there the finite angular sum oscillates far beyond
        // the plateau values and says nothing about the level.
        const double level = k - 0.5;
        const double radius = cluster_units_ * unit(n_phi);
        const auto& seen = found_[n_phi];
        auto usable = [&](double x, double f) {
            if (std::abs(f - std::round(f)) > kAmbiguousResidual) return false;
            for (double c : seen) {
                if (std::abs(x - c) < radius) return false;
            }
            return true;
        };
        for (auto it = memo_.lower_bound({n_phi, lo}); it != memo_.end() && it->first.first == n_phi; ++it) {
            const double x = it->first.second;
            if (x >= hi) break;
            const double f = it->second.w.real();
            if (!usable(x, f)) continue;
            if (f >= level) { hi = x; break; }
            lo = x;
        }
        width = std::max(width, tol_);
        while (hi - lo > width) {
            const double mid = 0.5 * (lo + hi);
            if (scaled(mid, n_phi) >= level) hi = mid; else lo = mid;
        }
        found_[n_phi].push_back(0.5 * (lo + hi));
        return {lo, hi};
    }

    bool below(int k, double xi, int n_phi) { return scaled(xi, n_phi) < k - 0.5; }

    const BlockTridiagonalSystem& system() const { return sys_; }

private:
    LocatorEval value(double xi, int n_phi) {
        const CountingSample s = counting_function(sys_, energy_, xi, QuadratureSpec::fixed(n_phi));
        return {static_cast<double>(two_m_) * s.raw, s.phi_shift != 0.0};
    }

    const BlockTridiagonalSystem& sys_;
    cplx energy_;
    double tol_;
    double cluster_units_;
    int two_m_;
    std::map<std::pair<int, double>, LocatorEval> memo_;
    std::map<int, std::vector<double>> found_;
};

// Largest cluster handed to the rational fit.
inline constexpr int kMaxFitCluster = 4;

// With N angles the trapezoid sum is exact: near a cluster of `size` exponents above
// `base` others, 2m N(x) = base + sum_j mult_j / (1 - c_j u), u = exp(-n N (x - xc))
// (times -1 on the shifted grid), up to terms exponentially small in the distance to
// the other exponents. Fits P(u) / Q(u) with deg Q = distinct poles, P(0) = size,
// by linear least squares, and reads the exponents off the poles. Returns nothing
// when the samples do not follow the model.
inline std::optional<std::vector<double>> fit_cluster(CrossingLocator& loc, int base, int size, double a, double b,
                                                      int n_phi) {
    const double nn = static_cast<double>(loc.system().n()) * n_phi;
    const double xc = 0.5 * (a + b);
    const int npts = std::max(3, 2 * size + 2);
    std::vector<cplx> s(static_cast<std::size_t>(npts)), u(static_cast<std::size_t>(npts));
    for (int i = 0; i < npts; ++i) {
        const double x = a + (b - a) * i / (npts - 1);
        const LocatorEval& e = loc.eval(x, n_phi);
        s[static_cast<std::size_t>(i)] = e.w - static_cast<double>(base);
        u[static_cast<std::size_t>(i)] = std::exp(-nn * (x - xc)) * (e.shifted ? -1.0 : 1.0);
        if (!std::isfinite(std::abs(s[static_cast<std::size_t>(i)]))) return std::nullopt;
    }
    const double lo_bound = a - 2.0 / nn, hi_bound = b + 2.0 / nn;
    for (int poles = size; poles >= 1; --poles) {
        const int cols = 2 * poles - 1;
        Matrix lhs(npts, cols);
        Vector rhs(npts);
        for (int i = 0; i < npts; ++i) {
            const cplx si = s[static_cast<std::size_t>(i)], ui = u[static_cast<std::size_t>(i)];
            cplx p = ui;
            for (int k = 0; k < poles; ++k, p *= ui) lhs(i, k) = si * p;
            p = ui;
            for (int k = 0; k + 1 < poles; ++k, p *= ui) lhs(i, poles + k) = -p;
            rhs(i) = static_cast<double>(size) - si;
        }
        Eigen::VectorXd scale(cols);
        for (int c = 0; c < cols; ++c) {
            scale(c) = lhs.col(c).cwiseAbs().maxCoeff();
            if (!(scale(c) > 0.0)) scale(c) = 1.0;
            lhs.col(c) /= scale(c);
        }
        Eigen::JacobiSVD<Matrix> svd(lhs, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (!(sv(cols - 1) > 1e-10 * sv(0))) continue;  // coincident poles: fewer distinct ones
        Vector coef = svd.solve(rhs);
        for (int c = 0; c < cols; ++c) coef(c) /= scale(c);
        auto model = [&](cplx x) {
            cplx q = 1.0, pp = static_cast<double>(size), xp = x;
            for (int k = 0; k < poles; ++k, xp *= x) q += coef(k) * xp;
            xp = x;
            for (int k = 0; k + 1 < poles; ++k, xp *= x) pp += coef(poles + k) * xp;
            return pp / q;
        };
        for (int i = 0; i < npts; ++i) {
            const cplx si = s[static_cast<std::size_t>(i)];
            if (!(std::abs(model(u[static_cast<std::size_t>(i)]) - si) <= 1e-7 * std::max(1.0, std::abs(si)))) {
                return std::nullopt;
            }
        }
        // Poles of P/Q sit at u = 1/c_j with c_j the roots of u^p + beta_1 u^{p-1} + ... + beta_p.
        Matrix comp = Matrix::Zero(poles, poles);
        for (int k = 0; k < poles; ++k) comp(0, k) = -coef(k);
        for (int k = 1; k < poles; ++k) comp(k, k - 1) = 1.0;
        Eigen::ComplexEigenSolver<Matrix> es(comp, false);
        if (es.info() != Eigen::Success) return std::nullopt;
        const Vector c = es.eigenvalues();
        std::vector<double> xs;
        int total = 0;
        for (int j = 0; j < poles; ++j) {
            if (!(std::abs(c(j)) > 0.0)) return std::nullopt;
            cplx pp = static_cast<double>(size), xp = 1.0 / c(j), den = 1.0;
            const cplx inv = xp;
            for (int k = 0; k + 1 < poles; ++k, xp *= inv) pp += coef(poles + k) * xp;
            for (int i = 0; i < poles; ++i) if (i != j) den *= 1.0 - c(i) / c(j);
            const cplx mult = pp / den;
            const double r = std::round(mult.real());
            if (!(std::abs(mult - r) < 0.05) || r < 1.0) return std::nullopt;
            const double x = xc + std::log(std::abs(c(j))) / nn;
            if (!(x > lo_bound && x < hi_bound)) return std::nullopt;
            for (int k = 0; k < static_cast<int>(r); ++k) xs.push_back(x);
            total += static_cast<int>(r);
        }
        if (total != size) return std::nullopt;
        std::sort(xs.begin(), xs.end());
        return xs;
    }
    return std::nullopt;
}

// A cluster whose members all have one modulus, at x0, satisfies
//   S(x0 + t) + S(x0 - t) = size   with S = 2m N - base,
// whatever their phases (1/(1 - q) + 1/(1 - 1/q) = 1 termwise). Newton on x0 from
// `guess`; returns x0 when the identity holds to rounding.
inline std::optional<double> common_modulus_centre(CrossingLocator& loc, int base, int size, double guess, int n_phi) {
    const double unit = loc.unit(n_phi);
    const double t = 3.0 * unit, eps = 1e-3 * unit;
    auto h = [&](double c) {
        const LocatorEval& p = loc.eval(c + t, n_phi);
        const LocatorEval& q = loc.eval(c - t, n_phi);
        if (p.shifted || q.shifted) return cplx{std::nan(""), 0.0};
        return p.w + q.w - static_cast<double>(2 * base + size);
    };
    double c = guess;
    for (int it = 0; it < 12; ++it) {
        const cplx hc = h(c);
        if (!std::isfinite(std::abs(hc))) return std::nullopt;
        if (std::abs(hc) < 1e-9 * size) return c;
        const cplx d = (h(c + eps) - hc) / eps;
        if (!(std::norm(d) > 0.0)) return std::nullopt;
        c -= (std::conj(d) * hc).real() / std::norm(d);
        if (!(std::abs(c - guess) < 3.0 * unit)) return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail

// Locates every exponent in [lo, hi]. Each level k - 1/2 of 2m Re N is bracketed by
// bisection to a couple of angular units 1 / (n N); clusters of nearby crossings are
// then resolved by the rational fit above, or recognised as sharing one modulus.
// Anything else (contaminated samples, close moduli in a large cluster) falls back
// to bisection to `tol` and angular refinement, and is finally reported at the
// cluster centre. Requires count(lo) = 0 and count(hi) = 2m.
inline ExponentSet locate_exponents(const BlockTridiagonalSystem& sys, cplx energy, const QuadratureSpec& quad,
                                    double lo, double hi, const LocateOptions& opt = {}) {
    if (!(lo < hi)) throw std::invalid_argument("locate_exponents: empty bracket");
    const int two_m = 2 * static_cast<int>(sys.m());
    detail::CrossingLocator loc(sys, energy, opt.tol, opt.cluster_units);
    const int n0 = quad.n_phi;
    const double f_lo = loc.scaled(lo, n0), f_hi = loc.scaled(hi, n0);
    if (!(std::abs(f_lo) < kAmbiguousResidual) || !(std::abs(f_hi - two_m) < kAmbiguousResidual)) {
        throw std::invalid_argument("locate_exponents: bracket invalid (2m N = " + std::to_string(f_lo) + " at lo, " +
                                    std::to_string(f_hi) + " at hi; need 0 and " + std::to_string(two_m) + ")");
    }
    auto at = [](std::vector<double>& v, int k) -> double& { return v[static_cast<std::size_t>(k - 1)]; };

    const double unit0 = loc.unit(n0);
    std::vector<double> xs(static_cast<std::size_t>(two_m));
    for (int k = 1; k <= two_m; ++k) {
        const auto [a, b] = loc.crossing(k, lo, hi, n0, 2.0 * unit0);
        at(xs, k) = 0.5 * (a + b);
    }
    std::sort(xs.begin(), xs.end());

    // Bisection to tol plus angular refinement for the levels [first, last], given
    // plateau points `left` and `right` outside the cluster.
    auto refine = [&](auto&& self, int first, int last, double left, double right, int n_phi) -> void {
        const double unit = loc.unit(n_phi);
        auto bracket = [&](int k) {
            double a = std::max(left, at(xs, first) - 2.0 * opt.cluster_units * unit);
            double b = std::min(right, at(xs, last) + 2.0 * opt.cluster_units * unit);
            if (!loc.below(k, a, n_phi) || loc.below(k, b, n_phi)) { a = left; b = right; }
            const auto [p, q] = loc.crossing(k, a, b, n_phi, opt.tol);
            return 0.5 * (p + q);
        };
        const double x_first = bracket(first), x_last = bracket(last);
        at(xs, first) = x_first;
        at(xs, last) = x_last;
        if (first == last) return;
        const int finer = n_phi * 4;
        const bool unresolved = x_last - x_first < opt.cluster_units * unit;
        if (unresolved || finer > opt.max_n_phi) {
            if (finer > opt.max_n_phi) {
                const double c = 0.5 * (x_first + x_last);
                for (int k = first; k <= last; ++k) at(xs, k) = c;
                return;
            }
            return self(self, first, last, left, right, finer);
        }
        for (int k = first + 1; k < last; ++k) at(xs, k) = bracket(k);
        std::sort(xs.begin() + (first - 1), xs.begin() + last);
        int start = first;
        for (int k = first + 1; k <= last + 1; ++k) {
            if (k <= last && at(xs, k) - at(xs, k - 1) < opt.cluster_units * unit) continue;
            const double l = start == first ? left : 0.5 * (at(xs, start - 1) + at(xs, start));
            const double r = k - 1 == last ? right : 0.5 * (at(xs, k - 1) + at(xs, k));
            if (k - 1 > start) self(self, start, k - 1, l, r, finer);
            start = k;
        }
    };

    int start = 1;
    std::vector<double> out = xs;
    for (int k = 2; k <= two_m + 1; ++k) {
        if (k <= two_m && at(xs, k) - at(xs, k - 1) < opt.cluster_units * unit0) continue;
        const int first = start, last = k - 1, size = last - first + 1;
        start = k;
        const double left = first == 1 ? lo : 0.5 * (at(xs, first - 1) + at(xs, first));
        const double right = last == two_m ? hi : 0.5 * (at(xs, last) + at(xs, last + 1));
        if (size <= detail::kMaxFitCluster) {
            const double a = std::max(left, at(xs, first) - 1.5 * unit0);
            const double b = std::min(right, at(xs, last) + 1.5 * unit0);
            if (auto fit = detail::fit_cluster(loc, first - 1, size, a, b, n0)) {
                std::copy(fit->begin(), fit->end(), out.begin() + (first - 1));
                continue;
            }
        }
        if (size > 1) {
            const double guess = 0.5 * (at(xs, first) + at(xs, last));
            if (auto c = detail::common_modulus_centre(loc, first - 1, size, guess, n0)) {
                std::fill(out.begin() + (first - 1), out.begin() + last, *c);
                continue;
            }
        }
        std::vector<double> saved = xs;
        refine(refine, first, last, left, right, n0);
        std::copy(xs.begin() + (first - 1), xs.begin() + last, out.begin() + (first - 1));
        // Later clusters use the coarse estimates.
        std::copy(saved.begin() + last, saved.end(), xs.begin() + last);
    }
    std::sort(out.begin(), out.end());
    return {out, true};
}

// --------------------------------------------------------------- sum rules

inline double total_exponent_sum(const BlockTridiagonalSystem& sys) {
    double s = 0.0;
    for (Index k = 0; k < sys.n(); ++k) {
        const Eigen::PartialPivLU<Matrix> lc(sys.C(k)), lb(sys.B(k));
        s += std::log(std::abs(lc.determinant())) - std::log(std::abs(lb.determinant()));
    }
    return s / static_cast<double>(sys.n());
}

struct JensenSides {
    double lhs{0.0};
    double rhs{0.0};
};

namespace detail {

// (1/mn) <log|det[H(e^{n xi + i theta}) - E]|>_theta - (1/mn) sum log|det B_k| with n_phi
// angles over the full circle. Beyond the z^n guard the same samples are obtained from
// H^B(e^{xi + i theta / n}), which has the same determinant.
inline double jensen_rhs(const BlockTridiagonalSystem& sys, cplx energy, double xi, int n_phi) {
    if (n_phi < 4) throw std::invalid_argument("jensen_relation: n_phi must be at least 4");
    const double n = static_cast<double>(sys.n()), mn = static_cast<double>(sys.dim());
    const bool plain = n * std::abs(xi) <= kPowerGuard;
    auto run = [&](double shift) {
        double acc = 0.0;
        for (int k = 0; k < n_phi; ++k) {
            const double theta = 2.0 * kPi * (k + shift) / n_phi;
            const LogValue d = plain ? det_shifted(sys, Variant::plain, std::exp(cplx{n * xi, theta}), energy)
                                     : det_shifted(sys, Variant::balanced, std::exp(cplx{xi, theta / n}), energy);
            if (d.is_zero() || !std::isfinite(d.log_abs)) {
                throw SpectrumCollision("jensen_relation: contour touches the spectrum" + at_point(xi, theta / n));
            }
            acc += d.log_abs;
        }
        return acc / n_phi;
    };
    double avg;
    try {
        avg = run(0.0);
    } catch (const SpectrumCollision&) {
        avg = run(0.5);
    }
    double logb = 0.0;
    for (Index k = 0; k < sys.n(); ++k) logb += std::log(std::abs(Eigen::PartialPivLU<Matrix>(sys.B(k)).determinant()));
    return (avg - logb) / mn;
}

}  // namespace detail

// lhs = (1/2m) sum_a (|xi_a - xi| + xi_a + xi) - xi  from the given exponents,
// rhs = the angular average of log|det[H - E]| on the circle of radius e^{n xi}.
inline JensenSides jensen_relation(const BlockTridiagonalSystem& sys, cplx energy, double xi, const ExponentSet& ex,
                                   int n_phi = 512) {
    JensenSides out;
    double s = 0.0;
    for (double x : ex.xs) s += std::abs(x - xi) + x + xi;
    out.lhs = s / (2.0 * static_cast<double>(sys.m())) - xi;
    out.rhs = detail::jensen_rhs(sys, energy, xi, n_phi);
    return out;
}

// (1/m) sum_a xi_a theta(xi_a), from the circle |z| = 1.
inline double positive_exponent_sum(const BlockTridiagonalSystem& sys, cplx energy, int n_phi = 512) {
    return detail::jensen_rhs(sys, energy, 0.0, n_phi);
}

}  // namespace tmcount
