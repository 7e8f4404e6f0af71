// banded_lu.hpp: complex band LU with partial pivoting (LAPACK gbtf2/gbtrs layout).
//
// Entry (i, j) of the band lives at ab(kl + ku + i - j, j); the top kl rows of
// the storage absorb the fill produced by row interchanges.

#pragma once

#include "tmcount/core.hpp"

#include <algorithm>
#include <vector>

namespace tmcount {

namespace detail {

// y -= a * b without the inf/nan recovery of the library operator.
inline void sub_product(cplx& y, const cplx& a, const cplx& b) {
    const double ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
    y = {y.real() - (ar * br - ai * bi), y.imag() - (ar * bi + ai * br)};
}

}  // namespace detail

class BandedLU {
public:
    BandedLU(Index n, Index kl, Index ku) : n_(n), kl_(kl), ku_(ku), ld_(2 * kl + ku + 1), ab_(ld_, n), piv_(n) {
        ab_.setZero();
    }

    Index size() const noexcept { return n_; }

    void set(Index i, Index j, cplx v) {
        if (i - j > kl_ || j - i > ku_) throw std::out_of_range("BandedLU::set outside band");
        ab_(kl_ + ku_ + i - j, j) = v;
    }

    void add(Index i, Index j, cplx v) {
        if (i - j > kl_ || j - i > ku_) throw std::out_of_range("BandedLU::add outside band");
        ab_(kl_ + ku_ + i - j, j) += v;
    }

    // Infinity norm of the assembled matrix (valid before factor()).
    double norm_inf() const {
        std::vector<double> rows(static_cast<std::size_t>(n_), 0.0);
        const Index kv = kl_ + ku_;
        for (Index j = 0; j < n_; ++j) {
            for (Index i = std::max<Index>(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i) {
                rows[static_cast<std::size_t>(i)] += std::abs(ab_(kv + i - j, j));
            }
        }
        return n_ == 0 ? 0.0 : *std::max_element(rows.begin(), rows.end());
    }

    void factor() {
        norm_ = norm_inf();
        const Index kv = kl_ + ku_;
        Index ju = 0;
        swaps_ = 0;
        min_pivot_ = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n_; ++j) {
            const Index km = std::min(kl_, n_ - 1 - j);
            Index jp = 0;
            double best = std::abs(ab_(kv, j));
            for (Index i = 1; i <= km; ++i) {
                const double a = std::abs(ab_(kv + i, j));
                if (a > best) { best = a; jp = i; }
            }
            piv_[j] = j + jp;
            min_pivot_ = std::min(min_pivot_, best);
            if (best == 0.0) continue;
            ju = std::max(ju, std::min(j + ku_ + jp, n_ - 1));
            if (jp != 0) {
                ++swaps_;
                for (Index c = j; c <= ju; ++c) std::swap(ab_(kv + j - c, c), ab_(kv + j + jp - c, c));
            }
            if (km > 0) {
                const cplx inv = 1.0 / ab_(kv, j);
                for (Index i = 1; i <= km; ++i) ab_(kv + i, j) *= inv;
                for (Index c = j + 1; c <= ju; ++c) {
                    const cplx u = ab_(kv + j - c, c);
                    if (u == cplx{}) continue;
                    cplx* col = &ab_(kv + j - c, c);
                    const cplx* l = &ab_(kv, j);
                    for (Index i = 1; i <= km; ++i) detail::sub_product(col[i], l[i], u);
                }
            }
        }
        factored_ = true;
    }

    // Smallest |pivot| relative to the infinity norm of the matrix.
    double relative_min_pivot() const { return norm_ > 0 ? min_pivot_ / norm_ : 0.0; }

    // Solves in place for every column of rhs. Only rows >= keep_from of the solution
    // are computed; the rows above are left unspecified.
    void solve(Matrix& rhs, Index keep_from = 0) const {
        if (!factored_) throw std::logic_error("BandedLU::solve before factor");
        const Index kv = kl_ + ku_;
        for (Index col = 0; col < rhs.cols(); ++col) {
            cplx* b = rhs.col(col).data();
            for (Index j = 0; j < n_ - 1; ++j) {
                const Index lm = std::min(kl_, n_ - 1 - j);
                const Index l = piv_[j];
                if (l != j) std::swap(b[l], b[j]);
                const cplx bj = b[j];
                if (bj == cplx{}) continue;
                for (Index i = 1; i <= lm; ++i) detail::sub_product(b[j + i], ab_(kv + i, j), bj);
            }
            for (Index j = n_ - 1; j >= keep_from; --j) {
                b[j] /= ab_(kv, j);
                const cplx bj = b[j];
                if (bj == cplx{}) continue;
                for (Index i = std::max<Index>(keep_from, j - kv); i < j; ++i) detail::sub_product(b[i], ab_(kv + i - j, j), bj);
            }
        }
    }

    LogValue determinant() const {
        if (!factored_) throw std::logic_error("BandedLU::determinant before factor");
        const Index kv = kl_ + ku_;
        LogValue d = (swaps_ % 2) ? LogValue{cplx{-1.0, 0.0}, 0.0} : LogValue{};
        for (Index j = 0; j < n_; ++j) d *= LogValue::from(ab_(kv, j));
        return d;
    }

private:
    Index n_, kl_, ku_, ld_;
    Matrix ab_;
    std::vector<Index> piv_;
    Index swaps_{0};
    double min_pivot_{0.0};
    double norm_{0.0};
    bool factored_{false};
};

}  // namespace tmcount
