// Test-only helpers: random system families and brute-force dense oracles that
// share no code with the library's banded and log-scaled paths.

#pragma once

#include "tmcount/anderson.hpp"
#include "tmcount/counting.hpp"
#include "tmcount/system_io.hpp"

#include <random>

namespace tmtest {

using tmcount::BlockTridiagonalSystem;
using tmcount::cplx;
using tmcount::Index;
using tmcount::Matrix;

inline Matrix gaussian(Index m, std::mt19937_64& g) {
    std::normal_distribution<double> d(0.0, std::sqrt(0.5));
    Matrix x(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j) x(i, j) = cplx{d(g), d(g)};
    return x;
}

// Redrawn until the reciprocal condition number is at least 1e-3.
inline Matrix well_conditioned(Index m, std::mt19937_64& g) {
    for (;;) {
        Matrix x = gaussian(m, g);
        if (Eigen::PartialPivLU<Matrix>(x).rcond() >= 1e-3) return x;
    }
}

inline BlockTridiagonalSystem random_system(Index m, Index n, std::mt19937_64& g) {
    std::vector<Matrix> a, b, c;
    for (Index k = 0; k < n; ++k) {
        a.push_back(gaussian(m, g));
        b.push_back(well_conditioned(m, g));
        c.push_back(well_conditioned(m, g));
    }
    return BlockTridiagonalSystem(m, a, b, c);
}

// A_k Hermitian, C_k = B_{k-1}^dagger, C_1 = B_n^dagger.
inline BlockTridiagonalSystem random_hermitian(Index m, Index n, std::mt19937_64& g) {
    std::vector<Matrix> a, b, c(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        const Matrix x = gaussian(m, g);
        a.push_back(x + x.adjoint());
        b.push_back(well_conditioned(m, g));
    }
    for (Index k = 0; k < n; ++k) c[static_cast<std::size_t>(k)] = b[static_cast<std::size_t>((k + n - 1) % n)].adjoint();
    return BlockTridiagonalSystem(m, a, b, c);
}

inline BlockTridiagonalSystem scalar_chain(cplx a, cplx b, cplx c, Index n) {
    const Matrix ma = Matrix::Constant(1, 1, a), mb = Matrix::Constant(1, 1, b), mc = Matrix::Constant(1, 1, c);
    return BlockTridiagonalSystem(1, std::vector<Matrix>(n, ma), std::vector<Matrix>(n, mb), std::vector<Matrix>(n, mc));
}

// The m = 1, n = 3 chain with A = 0, B = C = 1.
inline BlockTridiagonalSystem demo() { return scalar_chain(0.0, 1.0, 1.0, 3); }

// ------------------------------------------------------------- oracles

// Dense ring matrices written out entry by entry from their definitions.
inline Matrix dense_plain(const BlockTridiagonalSystem& s, cplx zp) {
    const Index m = s.m(), n = s.n();
    Matrix h = Matrix::Zero(m * n, m * n);
    for (Index k = 0; k < n; ++k) {
        h.block(k * m, k * m, m, m) = s.A(k);
        if (k + 1 < n) {
            h.block(k * m, (k + 1) * m, m, m) = s.B(k);
            h.block((k + 1) * m, k * m, m, m) = s.C(k + 1);
        }
    }
    h.block(0, (n - 1) * m, m, m) += s.C(0) / zp;
    h.block((n - 1) * m, 0, m, m) += zp * s.B(n - 1);
    return h;
}

inline Matrix dense_balanced(const BlockTridiagonalSystem& s, cplx z) {
    const Index m = s.m(), n = s.n();
    Matrix h = Matrix::Zero(m * n, m * n);
    for (Index k = 0; k < n; ++k) {
        h.block(k * m, k * m, m, m) = s.A(k);
        if (k + 1 < n) {
            h.block(k * m, (k + 1) * m, m, m) = z * s.B(k);
            h.block((k + 1) * m, k * m, m, m) = s.C(k + 1) / z;
        }
    }
    h.block(0, (n - 1) * m, m, m) += s.C(0) / z;
    h.block((n - 1) * m, 0, m, m) += z * s.B(n - 1);
    return h;
}

inline Matrix dense_open(const BlockTridiagonalSystem& s) {
    Matrix h = dense_plain(s, 1.0);
    const Index m = s.m(), n = s.n();
    h.block(0, (n - 1) * m, m, m) -= s.C(0);
    h.block((n - 1) * m, 0, m, m) -= s.B(n - 1);
    return h;
}

inline Matrix dense_resolvent(const Matrix& h, cplx e) {
    const Matrix d = h - e * Matrix::Identity(h.rows(), h.cols());
    return Eigen::FullPivLU<Matrix>(d).inverse();
}

// Product t_n ... t_1 in long double, from explicit block inverses.
using LMatrix = Eigen::Matrix<std::complex<long double>, Eigen::Dynamic, Eigen::Dynamic>;

inline LMatrix transfer_long(const BlockTridiagonalSystem& s, cplx e) {
    const Index m = s.m();
    LMatrix t = LMatrix::Identity(2 * m, 2 * m);
    for (Index k = 0; k < s.n(); ++k) {
        const LMatrix binv = s.B(k).cast<std::complex<long double>>().inverse();
        LMatrix f = LMatrix::Zero(2 * m, 2 * m);
        f.topLeftCorner(m, m) = binv * (std::complex<long double>(e) * LMatrix::Identity(m, m) - s.A(k).cast<std::complex<long double>>());
        f.topRightCorner(m, m) = -binv * s.C(k).cast<std::complex<long double>>();
        f.bottomLeftCorner(m, m).setIdentity();
        t = f * t;
    }
    return t;
}

inline std::vector<double> exponents_long(const BlockTridiagonalSystem& s, cplx e) {
    const LMatrix t = transfer_long(s, e);
    Eigen::ComplexEigenSolver<LMatrix> es(t, false);
    std::vector<double> xs;
    for (Index i = 0; i < es.eigenvalues().size(); ++i) {
        xs.push_back(static_cast<double>(std::log(std::abs(es.eigenvalues()(i)))) / static_cast<double>(s.n()));
    }
    std::sort(xs.begin(), xs.end());
    return xs;
}

inline double min_distance(const std::vector<double>& xs, double xi) {
    double d = std::numeric_limits<double>::infinity();
    for (double x : xs) d = std::min(d, std::abs(x - xi));
    return d;
}

}  // namespace tmtest
