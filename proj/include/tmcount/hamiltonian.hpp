// hamiltonian.hpp: ring Hamiltonians H(z), H^B(z), the open chain h, and their resolvent corners.
//
//   H(z):    off-diagonals B_k / C_{k+1}, corners C_1/z (top right) and z B_n (bottom left)
//   H^B(z):  off-diagonals z B_k / C_{k+1}/z, same corners       (H(z^n) = S H^B(z) S^{-1})
//   h:       off-diagonals B_k / C_{k+1}, no corners
//
// Resolvent corner blocks come from a partially pivoted band LU of the interleaved
// ring, O(n m^3), without forming the full inverse. Block elimination without
// pivoting is not an option here: between exponents of very different size the
// corner Schur complement has condition numbers far beyond 1e16.

#pragma once

#include "tmcount/banded_lu.hpp"
#include "tmcount/transfer.hpp"

#include <optional>

namespace tmcount {

enum class Variant { plain, balanced, corner_free };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::plain: return "plain";
        case Variant::balanced: return "balanced";
        case Variant::corner_free: return "corner_free";
    }
    return "?";
}

// Any explicit z^n is refused beyond this log-modulus.
inline constexpr double kPowerGuard = 300.0;

// "E on spectrum" when the smallest pivot falls below this fraction of ||H - E||_inf.
inline constexpr double kPivotDegeneracy = 1e-13;

inline void require_nonzero(cplx z) {
    if (z == cplx{}) throw std::invalid_argument("ring Hamiltonian: z must be nonzero");
}

inline void require_power_guard(Index n, cplx z) {
    const double growth = static_cast<double>(n) * std::abs(std::log(std::abs(z)));
    if (!(growth <= kPowerGuard)) {
        throw OverflowGuard("z^n out of range (n |log|z|| = " + std::to_string(growth) + "); use the balanced path");
    }
}

// The nonzero blocks of H - E for a given variant (0-based block indices).
struct RingBlocks {
    Index m{0}, n{0};
    std::vector<Matrix> diag;   // D_k = A_k - E
    std::vector<Matrix> upper;  // (k, k+1), k = 0..n-2
    std::vector<Matrix> lower;  // (k+1, k), k = 0..n-2
    Matrix top_right;           // (0, n-1)
    Matrix bottom_left;         // (n-1, 0)
};

inline RingBlocks ring_blocks(const BlockTridiagonalSystem& sys, Variant variant, cplx z, cplx energy) {
    if (variant != Variant::corner_free) require_nonzero(z);
    RingBlocks r;
    r.m = sys.m();
    r.n = sys.n();
    const Matrix id = Matrix::Identity(r.m, r.m);
    const cplx up = variant == Variant::balanced ? z : cplx{1.0, 0.0};
    const cplx down = variant == Variant::balanced ? 1.0 / z : cplx{1.0, 0.0};
    for (Index k = 0; k < r.n; ++k) r.diag.push_back(sys.A(k) - energy * id);
    for (Index k = 0; k + 1 < r.n; ++k) {
        r.upper.push_back(up * sys.B(k));
        r.lower.push_back(down * sys.C(k + 1));
    }
    if (variant == Variant::corner_free) {
        r.top_right = Matrix::Zero(r.m, r.m);
        r.bottom_left = Matrix::Zero(r.m, r.m);
    } else {
        r.top_right = sys.C(0) / z;
        r.bottom_left = z * sys.B(r.n - 1);
    }
    return r;
}

struct RingHamiltonian {
    Variant variant{Variant::plain};
    cplx z{1.0, 0.0};
    Matrix dense;
};

inline Matrix dense_from_blocks(const RingBlocks& r, cplx shift) {
    const Index m = r.m, n = r.n;
    Matrix h = Matrix::Zero(m * n, m * n);
    for (Index k = 0; k < n; ++k) h.block(k * m, k * m, m, m) = r.diag[static_cast<std::size_t>(k)];
    for (Index k = 0; k + 1 < n; ++k) {
        h.block(k * m, (k + 1) * m, m, m) += r.upper[static_cast<std::size_t>(k)];
        h.block((k + 1) * m, k * m, m, m) += r.lower[static_cast<std::size_t>(k)];
    }
    h.block(0, (n - 1) * m, m, m) += r.top_right;
    h.block((n - 1) * m, 0, m, m) += r.bottom_left;
    h.diagonal().array() += shift;
    return h;
}

// Dense assembly of H(z) (z is z_pow for the plain variant), H^B(z) or h.
inline RingHamiltonian build_hamiltonian(const BlockTridiagonalSystem& sys, Variant variant, cplx z = {1.0, 0.0}) {
    return {variant, z, dense_from_blocks(ring_blocks(sys, variant, z, 0.0), 0.0)};
}

// ------------------------------------------------------------ corner blocks

enum class CornerSource { plain, balanced, open };

// Blocks (1,n), (1,1), (n,n), (n,1) of a resolvent [H - E]^{-1}.
struct CornerBlocks {
    Matrix b_1n, b_11, b_nn, b_n1;
    CornerSource source{CornerSource::balanced};
    cplx z{1.0, 0.0};
};

namespace detail {

// Interleaved block order ..., 2, n-1, 1, n turns the ring into a band of block width 2
// with the corner blocks last, so their rows of a solution come out of a short back
// substitution.
inline std::vector<Index> interleaved_positions(Index n) {
    std::vector<Index> pos(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Index block = (i % 2 == 0) ? i / 2 : n - 1 - (i - 1) / 2;
        pos[static_cast<std::size_t>(block)] = n - 1 - i;
    }
    return pos;
}

class RingBandLU {
public:
    explicit RingBandLU(const RingBlocks& r) : m_(r.m), n_(r.n), pos_(interleaved_positions(r.n)) {
        Index reach = 0;
        auto note = [&](Index a, Index b) {
            reach = std::max(reach, std::abs(pos_[static_cast<std::size_t>(a)] - pos_[static_cast<std::size_t>(b)]));
        };
        for (Index k = 0; k + 1 < n_; ++k) note(k, k + 1);
        note(0, n_ - 1);
        const Index bw = (reach + 1) * m_ - 1;
        lu_.emplace(m_ * n_, bw, bw);
        for (Index k = 0; k < n_; ++k) put(k, k, r.diag[static_cast<std::size_t>(k)]);
        for (Index k = 0; k + 1 < n_; ++k) {
            put(k, k + 1, r.upper[static_cast<std::size_t>(k)]);
            put(k + 1, k, r.lower[static_cast<std::size_t>(k)]);
        }
        put(0, n_ - 1, r.top_right);
        put(n_ - 1, 0, r.bottom_left);
        lu_->factor();
    }

    double relative_min_pivot() const { return lu_->relative_min_pivot(); }
    LogValue determinant() const { return lu_->determinant(); }  // symmetric permutation: det unchanged

    // Column blocks `cols` of the inverse, restricted to row blocks `rows`.
    std::vector<std::vector<Matrix>> inverse_blocks(const std::vector<Index>& rows, const std::vector<Index>& cols) const {
        Matrix rhs = Matrix::Zero(m_ * n_, m_ * static_cast<Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const Index p = pos_[static_cast<std::size_t>(cols[c])];
            rhs.block(p * m_, static_cast<Index>(c) * m_, m_, m_).setIdentity();
        }
        Index first = m_ * n_;
        for (Index b : rows) first = std::min(first, pos_[static_cast<std::size_t>(b)] * m_);
        lu_->solve(rhs, first);
        std::vector<std::vector<Matrix>> out(rows.size());
        for (std::size_t a = 0; a < rows.size(); ++a) {
            const Index p = pos_[static_cast<std::size_t>(rows[a])];
            for (std::size_t c = 0; c < cols.size(); ++c) out[a].push_back(rhs.block(p * m_, static_cast<Index>(c) * m_, m_, m_));
        }
        return out;
    }

private:
    void put(Index bi, Index bj, const Matrix& blk) {
        const Index pi = pos_[static_cast<std::size_t>(bi)] * m_, pj = pos_[static_cast<std::size_t>(bj)] * m_;
        for (Index i = 0; i < m_; ++i)
            for (Index j = 0; j < m_; ++j)
                if (blk(i, j) != cplx{}) lu_->add(pi + i, pj + j, blk(i, j));
    }

    Index m_, n_;
    std::vector<Index> pos_;
    std::optional<BandedLU> lu_;
};

inline CornerBlocks corners_from_blocks(const RingBlocks& r, CornerSource source, cplx z) {
    const Index n = r.n;
    RingBandLU lu(r);
    if (!(lu.relative_min_pivot() >= kPivotDegeneracy)) {
        throw SpectrumCollision("resolvent: E is on the spectrum of the ring operator (relative pivot " +
                                std::to_string(lu.relative_min_pivot()) + ")");
    }
    const auto blk = lu.inverse_blocks({0, n - 1}, {0, n - 1});
    return {blk[0][1], blk[0][0], blk[1][1], blk[1][0], source, z};
}

}  // namespace detail

// Corner blocks of G^B(E, z) = [H^B(z) - E]^{-1}.
inline CornerBlocks resolvent_corners_balanced(const BlockTridiagonalSystem& sys, cplx energy, cplx z) {
    return detail::corners_from_blocks(ring_blocks(sys, Variant::balanced, z, energy), CornerSource::balanced, z);
}

// Corner blocks of G(E, z_pow) = [H(z_pow) - E]^{-1}.
inline CornerBlocks resolvent_corners_plain(const BlockTridiagonalSystem& sys, cplx energy, cplx z_pow) {
    return detail::corners_from_blocks(ring_blocks(sys, Variant::plain, z_pow, energy), CornerSource::plain, z_pow);
}

// Corner blocks g_ab of g(E) = [h - E]^{-1}; z-independent.
inline CornerBlocks resolvent_corners_open(const BlockTridiagonalSystem& sys, cplx energy) {
    try {
        return detail::corners_from_blocks(ring_blocks(sys, Variant::corner_free, 1.0, energy), CornerSource::open, 1.0);
    } catch (const SpectrumCollision&) {
        throw SpectrumCollision("resolvent_corners_open: E is on the spectrum of the open chain h");
    }
}

// ------------------------------------------------------------ determinants

// det[E - H] for the given variant, via the band LU, as phase * exp(log|det|).
inline LogValue det_shifted(const BlockTridiagonalSystem& sys, Variant variant, cplx z, cplx energy) {
    const detail::RingBandLU lu(ring_blocks(sys, variant, z, energy));
    LogValue d = lu.determinant();  // det[H - E]
    if (sys.dim() % 2) d.phase = -d.phase;
    return d;
}

// ----------------------------------------------------------- similarity

namespace detail {

// (S x S^{-1})_{ab} = s^{a-b} x_{ab} for S = diag(s^a I_m).
inline Matrix conjugate_by_powers(const Matrix& x, Index n, Index m, cplx s) {
    Matrix y = x;
    for (Index a = 0; a < n; ++a)
        for (Index b = 0; b < n; ++b)
            if (a != b) y.block(a * m, b * m, m, m) *= std::pow(s, static_cast<int>(a - b));
    return y;
}

}  // namespace detail

// ||S(z) H^B(z) S(z)^{-1} - H(z^n)||_inf with S(z) = diag(z^a I_m).
inline double similarity_transform_check(const BlockTridiagonalSystem& sys, cplx z) {
    require_nonzero(z);
    const Index n = sys.n(), m = sys.m();
    require_power_guard(n, z);
    const Matrix hb = build_hamiltonian(sys, Variant::balanced, z).dense;
    const Matrix hp = build_hamiltonian(sys, Variant::plain, std::pow(z, static_cast<int>(n))).dense;
    return inf_norm(detail::conjugate_by_powers(hb, n, m, z) - hp);
}

// ||H^B(z w^{-1}) - S(w) H^B(z) S(w)^{-1}||_inf with w = exp(2 pi i / n).
inline double rotation_covariance_check(const BlockTridiagonalSystem& sys, cplx z) {
    require_nonzero(z);
    const Index n = sys.n(), m = sys.m();
    const cplx w = std::polar(1.0, 2.0 * kPi / static_cast<double>(n));
    const Matrix hb = build_hamiltonian(sys, Variant::balanced, z).dense;
    const Matrix rotated = build_hamiltonian(sys, Variant::balanced, z / w).dense;
    return inf_norm(rotated - detail::conjugate_by_powers(hb, n, m, w));
}

// ------------------------------------------------------------------ duality

// Both sides of  det[T(E) - z] det[B_1...B_n] = (-z)^m det[E - H(z)].
struct DualitySides {
    LogValue transfer_side;
    LogValue hamiltonian_side;
    double scale_log{0.0};  // log of prod(|z_a| + |z|) prod|det B_k|, the natural size of either side
};

inline DualitySides duality_sides(const BlockTridiagonalSystem& sys, cplx energy, cplx z) {
    require_nonzero(z);
    const Index m = sys.m();
    const TransferMatrix t = transfer_product(sys, energy);
    Eigen::ComplexEigenSolver<Matrix> es(t.mat, false);
    if (es.info() != Eigen::Success) throw NumericalError("duality_residual: eigenvalue iteration failed");
    DualitySides out;
    LogValue lhs;
    double scale = 0.0;
    const double logz = std::log(std::abs(z));
    for (Index a = 0; a < es.eigenvalues().size(); ++a) {
        const cplx mu = es.eigenvalues()(a);
        // lambda = mu e^s;  lambda - z = lambda (1 - z/lambda)
        const cplx log_lambda = std::log(mu) + t.log_scale;
        const cplx ratio = std::exp(std::log(z) - log_lambda);  // z / lambda
        LogValue f = LogValue::from(1.0 - ratio);
        f *= LogValue{std::exp(cplx{0.0, log_lambda.imag()}), log_lambda.real()};
        lhs *= f;
        const double hi = std::max(log_lambda.real(), logz), lo = std::min(log_lambda.real(), logz);
        scale += hi + std::log1p(std::exp(lo - hi));
    }
    for (Index k = 0; k < sys.n(); ++k) {
        const Eigen::PartialPivLU<Matrix> lu(sys.B(k));
        const LogValue d = LogValue::from(lu.determinant());
        lhs *= d;
        scale += d.log_abs;
    }
    LogValue rhs = det_shifted(sys, Variant::plain, z, energy);
    rhs *= LogValue{std::pow(-z / std::abs(z), static_cast<int>(m)), static_cast<double>(m) * logz};
    out.transfer_side = lhs;
    out.hamiltonian_side = rhs;
    out.scale_log = scale;
    return out;
}

// Sides below this fraction of their natural size count as zero.
inline constexpr double kCommonZero = 1e-12;

// |L - R| / (|L| + |R|) for the two sides of the duality identity; 0 when both
// sides vanish relative to their natural size.
inline double duality_residual(const BlockTridiagonalSystem& sys, cplx energy, cplx z) {
    const DualitySides s = duality_sides(sys, energy, z);
    const double zero = s.scale_log + std::log(kCommonZero);
    if (s.transfer_side.log_abs < zero && s.hamiltonian_side.log_abs < zero) return 0.0;
    return relative_difference(s.transfer_side, s.hamiltonian_side);
}

}  // namespace tmcount
