// operators.hpp: the block-tridiagonal problem instance: data model, validation, Hermitian test.
//
// A system is the three-term recursion
//     C_k u_{k-1} + A_k u_k + B_k u_{k+1} = E u_k,   k = 1..n
// with m x m complex blocks. Blocks are stored 0-based: A(0) is A_1.

#pragma once

#include "tmcount/core.hpp"

#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tmcount {

class BlockTridiagonalSystem {
public:
    BlockTridiagonalSystem() = default;

    // No validation here; a malformed instance is representable so that
    // validate_system can describe what is wrong with it.
    BlockTridiagonalSystem(Index m, std::vector<Matrix> a, std::vector<Matrix> b, std::vector<Matrix> c)
        : m_(m), a_(std::move(a)), b_(std::move(b)), c_(std::move(c)) {}

    Index m() const noexcept { return m_; }
    Index n() const noexcept { return static_cast<Index>(a_.size()); }
    Index dim() const noexcept { return m_ * n(); }

    const Matrix& A(Index k) const { return a_.at(static_cast<std::size_t>(k)); }
    const Matrix& B(Index k) const { return b_.at(static_cast<std::size_t>(k)); }
    const Matrix& C(Index k) const { return c_.at(static_cast<std::size_t>(k)); }

    const std::vector<Matrix>& As() const noexcept { return a_; }
    const std::vector<Matrix>& Bs() const noexcept { return b_; }
    const std::vector<Matrix>& Cs() const noexcept { return c_; }

    friend bool operator==(const BlockTridiagonalSystem& x, const BlockTridiagonalSystem& y) {
        auto same = [](const std::vector<Matrix>& p, const std::vector<Matrix>& q) {
            if (p.size() != q.size()) return false;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (p[i].rows() != q[i].rows() || p[i].cols() != q[i].cols()) return false;
                if (p[i] != q[i]) return false;
            }
            return true;
        };
        return x.m_ == y.m_ && same(x.a_, y.a_) && same(x.b_, y.b_) && same(x.c_, y.c_);
    }

private:
    Index m_{0};
    std::vector<Matrix> a_, b_, c_;
};

// ---------------------------------------------------------------- validation

struct ValidationIssue {
    enum class Kind { dimension, singular, non_finite, too_short, count_mismatch };
    Kind kind;
    char block{' '};   // 'A', 'B', 'C' or ' ' for system-level issues
    Index index{-1};   // 1-based block index, -1 for system-level issues
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const noexcept { return issues.empty(); }

    bool has(ValidationIssue::Kind kind, char block = ' ', Index index = -1) const {
        for (const auto& i : issues) {
            if (i.kind != kind) continue;
            if (block != ' ' && i.block != block) continue;
            if (index >= 0 && i.index != index) continue;
            return true;
        }
        return false;
    }

    std::string to_string() const {
        std::ostringstream os;
        for (const auto& i : issues) os << i.message << '\n';
        return os.str();
    }
};

struct ValidationOptions {
    double rcond_threshold{1e-12};
};

// LU-based reciprocal condition estimate (L1 norm); 0 for the zero matrix.
inline double reciprocal_condition(const Matrix& x) {
    if (x.rows() == 0 || x.rows() != x.cols()) return 0.0;
    if (!all_finite(x) || x.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    Eigen::PartialPivLU<Matrix> lu(x);
    const double r = lu.rcond();
    return std::isfinite(r) ? r : 0.0;
}

inline ValidationReport validate_system(const BlockTridiagonalSystem& sys, const ValidationOptions& opt = {}) {
    using Kind = ValidationIssue::Kind;
    ValidationReport rep;
    const Index m = sys.m();
    if (m < 1) rep.issues.push_back({Kind::dimension, ' ', -1, "block size m must be positive"});
    if (sys.Bs().size() != sys.As().size() || sys.Cs().size() != sys.As().size()) {
        std::ostringstream os;
        os << "block counts differ: " << sys.As().size() << " A, " << sys.Bs().size() << " B, "
           << sys.Cs().size() << " C";
        rep.issues.push_back({Kind::count_mismatch, ' ', -1, os.str()});
    }
    if (sys.n() < 3) {
        rep.issues.push_back({Kind::too_short, ' ', -1, "n must be at least 3 (got " + std::to_string(sys.n()) + ")"});
    }

    auto check = [&](char name, const std::vector<Matrix>& blocks, bool need_nonsingular) {
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const Matrix& x = blocks[k];
            const Index idx = static_cast<Index>(k) + 1;
            std::ostringstream where;
            where << name << '_' << idx;
            if (x.rows() != m || x.cols() != m) {
                std::ostringstream os;
                os << where.str() << ": expected " << m << 'x' << m << ", got " << x.rows() << 'x' << x.cols();
                rep.issues.push_back({Kind::dimension, name, idx, os.str()});
                continue;
            }
            if (!all_finite(x)) {
                rep.issues.push_back({Kind::non_finite, name, idx, where.str() + ": non-finite entry"});
                continue;
            }
            if (need_nonsingular && m > 0) {
                const double rc = reciprocal_condition(x);
                if (rc < opt.rcond_threshold) {
                    std::ostringstream os;
                    os << where.str() << ": numerically singular (rcond " << rc << ")";
                    rep.issues.push_back({Kind::singular, name, idx, os.str()});
                }
            }
        }
    };
    check('A', sys.As(), false);
    check('B', sys.Bs(), true);
    check('C', sys.Cs(), true);
    return rep;
}

inline void require_valid(const BlockTridiagonalSystem& sys, const ValidationOptions& opt = {}) {
    const auto rep = validate_system(sys, opt);
    if (!rep.ok()) throw ValidationError("invalid system:\n" + rep.to_string());
}

// ------------------------------------------------------------ Hermitian case

struct HermitianTag {
    bool is_hermitian{false};
};

// A_k = A_k^dagger, C_k = B_{k-1}^dagger for k = 2..n, and the ring closure C_1 = B_n^dagger.
inline HermitianTag hermitian_check(const BlockTridiagonalSystem& sys, double tol) {
    const Index n = sys.n();
    auto close = [tol](const Matrix& x, const Matrix& y) {
        return x.rows() == y.rows() && x.cols() == y.cols() && (x - y).cwiseAbs().maxCoeff() <= tol;
    };
    for (Index k = 0; k < n; ++k) {
        if (!close(sys.A(k), sys.A(k).adjoint())) return {false};
        const Index prev = (k + n - 1) % n;
        if (!close(sys.C(k), sys.B(prev).adjoint())) return {false};
    }
    return {true};
}

}  // namespace tmcount
