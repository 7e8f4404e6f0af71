// transfer.hpp: one-step and n-step transfer matrices, and their exponents computed directly.
//
// t_k(E) = [[B_k^{-1}(E - A_k), -B_k^{-1} C_k], [I, 0]] maps (u_k, u_{k-1}) to (u_{k+1}, u_k);
// T(E) = t_n ... t_1. The exponents are xi_a = log|z_a| / n for the 2m eigenvalues z_a of T.

#pragma once

#include "tmcount/operators.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tmcount {

inline Matrix one_step_transfer(const BlockTridiagonalSystem& sys, Index k, cplx energy) {
    const Index m = sys.m();
    if (k < 0 || k >= sys.n()) throw std::out_of_range("one_step_transfer: step index out of range");
    Eigen::PartialPivLU<Matrix> lu(sys.B(k));
    if (!(lu.rcond() > 1e-14)) {
        throw NumericalError("one_step_transfer: B_" + std::to_string(k + 1) + " is numerically singular");
    }
    Matrix rhs(m, 2 * m);
    rhs.leftCols(m) = energy * Matrix::Identity(m, m) - sys.A(k);
    rhs.rightCols(m) = -sys.C(k);
    Matrix t = Matrix::Zero(2 * m, 2 * m);
    t.topRows(m) = lu.solve(rhs);
    t.bottomLeftCorner(m, m).setIdentity();
    return t;
}

// Represents mat * exp(log_scale).
struct TransferMatrix {
    Matrix mat;
    double log_scale{0.0};

    Matrix represented() const { return mat * std::exp(log_scale); }
};

inline TransferMatrix transfer_product(const BlockTridiagonalSystem& sys, cplx energy) {
    const Index m = sys.m();
    TransferMatrix out{Matrix::Identity(2 * m, 2 * m), 0.0};
    for (Index k = 0; k < sys.n(); ++k) {
        const Matrix t = one_step_transfer(sys, k, energy);
        if (!all_finite(t)) throw NumericalError("transfer_product: non-finite factor at step " + std::to_string(k + 1));
        out.mat = t * out.mat;
        const double s = inf_norm(out.mat);
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw NumericalError("transfer_product: degenerate product at step " + std::to_string(k + 1));
        }
        out.mat /= s;
        out.log_scale += std::log(s);
    }
    return out;
}

struct ExponentSet {
    std::vector<double> xs;  // ascending, duplicates kept
    bool reliable{true};

    double sum() const {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
};

// Exponent spread (in units of log) beyond which the smallest eigenvalue moduli of
// a single dense product fall below double precision resolution.
inline constexpr double kReliableLogSpread = 30.0;

// Largest lift 2mn for which exponents come from the block-cyclic lift.
inline constexpr Index kCyclicLiftMaxDim = 480;

namespace detail {

// Eigenvalues of the block-cyclic matrix K with K(k+1 mod n, k) = t_k are the n-th
// roots of the eigenvalues of t_n...t_1, so each per-step modulus appears n times.
inline std::vector<double> exponents_by_cyclic_lift(const BlockTridiagonalSystem& sys, cplx energy) {
    const Index m = sys.m(), n = sys.n(), w = 2 * m;
    Matrix lift = Matrix::Zero(w * n, w * n);
    for (Index k = 0; k < n; ++k) lift.block(((k + 1) % n) * w, k * w, w, w) = one_step_transfer(sys, k, energy);
    Eigen::ComplexEigenSolver<Matrix> es(lift, false);
    if (es.info() != Eigen::Success) throw NumericalError("stable_exponents: eigenvalue iteration failed");
    std::vector<double> logs(static_cast<std::size_t>(w * n));
    for (Index i = 0; i < w * n; ++i) logs[static_cast<std::size_t>(i)] = std::log(std::abs(es.eigenvalues()(i)));
    std::sort(logs.begin(), logs.end());
    std::vector<double> xs(static_cast<std::size_t>(w));
    for (Index a = 0; a < w; ++a) {
        double s = 0.0;
        for (Index r = 0; r < n; ++r) s += logs[static_cast<std::size_t>(a * n + r)];
        xs[static_cast<std::size_t>(a)] = s / static_cast<double>(n);
    }
    return xs;
}

inline std::vector<double> exponents_by_product(const BlockTridiagonalSystem& sys, cplx energy) {
    const TransferMatrix t = transfer_product(sys, energy);
    Eigen::ComplexEigenSolver<Matrix> es(t.mat, false);
    if (es.info() != Eigen::Success) throw NumericalError("stable_exponents: eigenvalue iteration failed");
    std::vector<double> xs;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        xs.push_back((t.log_scale + std::log(std::abs(es.eigenvalues()(i)))) / static_cast<double>(sys.n()));
    }
    std::sort(xs.begin(), xs.end());
    return xs;
}

}  // namespace detail

// Direct oracle for the exponents. Small problems use the block-cyclic lift, whose
// eigenvalues carry per-step rather than n-step dynamic range; larger ones fall back
// to the eigenvalues of the rescaled product. `reliable` is false whenever
// n * (xi_max - xi_min) exceeds kReliableLogSpread.
inline ExponentSet stable_exponents(const BlockTridiagonalSystem& sys, cplx energy) {
    ExponentSet out;
    out.xs = 2 * sys.m() * sys.n() <= kCyclicLiftMaxDim ? detail::exponents_by_cyclic_lift(sys, energy)
                                                        : detail::exponents_by_product(sys, energy);
    for (double x : out.xs) {
        if (!std::isfinite(x)) throw NumericalError("stable_exponents: non-finite exponent");
    }
    out.reliable = static_cast<double>(sys.n()) * (out.xs.back() - out.xs.front()) <= kReliableLogSpread;
    return out;
}

// #{a : xi_a < xi}. Throws when xi is within `tol` of an exponent or when the
// exponents are flagged unreliable.
inline int direct_count(const ExponentSet& ex, double xi, double tol = 1e-9) {
    if (!ex.reliable) throw NumericalError("direct_count: direct exponents are not reliable");
    int count = 0;
    for (double x : ex.xs) {
        if (std::abs(x - xi) <= tol) throw NumericalError("direct_count: xi coincides with an exponent");
        count += x < xi;
    }
    return count;
}

inline int direct_count(const BlockTridiagonalSystem& sys, cplx energy, double xi, double tol = 1e-9) {
    return direct_count(stable_exponents(sys, energy), xi, tol);
}

// A bound L with |xi_a| <= L for every exponent, from ||T|| <= prod ||t_k|| and the
// same for T^{-1}; t_k^{-1} = [[0, I], [-C_k^{-1} B_k, C_k^{-1}(E - A_k)]].
inline double exponent_bound(const BlockTridiagonalSystem& sys, cplx energy) {
    const Index m = sys.m();
    double up = 0.0, down = 0.0;
    for (Index k = 0; k < sys.n(); ++k) {
        up += std::log(inf_norm(one_step_transfer(sys, k, energy)));
        Eigen::PartialPivLU<Matrix> lu(sys.C(k));
        Matrix inv = Matrix::Zero(2 * m, 2 * m);
        inv.topRightCorner(m, m).setIdentity();
        inv.bottomLeftCorner(m, m) = -lu.solve(sys.B(k));
        inv.bottomRightCorner(m, m) = lu.solve(energy * Matrix::Identity(m, m) - sys.A(k));
        down += std::log(inf_norm(inv));
    }
    return std::max(up, down) / static_cast<double>(sys.n());
}

}  // namespace tmcount
