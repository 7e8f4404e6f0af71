#include "support.hpp"

#include <gtest/gtest.h>

using namespace tmcount;
using tmtest::demo;

namespace {

Matrix m3(std::initializer_list<double> v) {
    Matrix x(3, 3);
    auto it = v.begin();
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) x(i, j) = *it++;
    return x;
}

Matrix block(const Matrix& x, Index m, Index a, Index b) { return x.block(a * m, b * m, m, m); }

double rel(const Matrix& x, const Matrix& ref) { return (x - ref).norm() / std::max(1e-300, ref.norm()); }

}  // namespace

TEST(Build, PlainRingOfOnes) {
    const Matrix h = build_hamiltonian(demo(), Variant::plain, 1.0).dense;
    EXPECT_EQ(h, m3({0, 1, 1, 1, 0, 1, 1, 1, 0}));
}

TEST(Build, BalancedAtOneEqualsPlain) {
    EXPECT_EQ(build_hamiltonian(demo(), Variant::balanced, 1.0).dense, build_hamiltonian(demo(), Variant::plain, 1.0).dense);
}

TEST(Build, CornerFreeIsOpenChain) {
    EXPECT_EQ(build_hamiltonian(demo(), Variant::corner_free).dense, m3({0, 1, 0, 1, 0, 1, 0, 1, 0}));
}

TEST(Build, MatchesDenseOracles) {
    std::mt19937_64 g(31);
    const auto s = tmtest::random_system(2, 5, g);
    const cplx z{0.8, 0.9};
    EXPECT_LT((build_hamiltonian(s, Variant::plain, z).dense - tmtest::dense_plain(s, z)).norm(), 1e-14);
    EXPECT_LT((build_hamiltonian(s, Variant::balanced, z).dense - tmtest::dense_balanced(s, z)).norm(), 1e-14);
    EXPECT_LT((build_hamiltonian(s, Variant::corner_free).dense - tmtest::dense_open(s)).norm(), 1e-14);
}

TEST(Build, ZeroZIsRejected) {
    EXPECT_THROW(build_hamiltonian(demo(), Variant::plain, 0.0), std::invalid_argument);
    EXPECT_THROW(build_hamiltonian(demo(), Variant::balanced, 0.0), std::invalid_argument);
    EXPECT_NO_THROW(build_hamiltonian(demo(), Variant::corner_free, 0.0));
}

TEST(Similarity, ExactAtOne) {
    std::mt19937_64 g(32);
    EXPECT_EQ(similarity_transform_check(tmtest::random_system(2, 4, g), 1.0), 0.0);
}

TEST(Similarity, RandomOffCircle) {
    std::mt19937_64 g(33);
    const auto s = tmtest::random_system(2, 4, g);
    EXPECT_LT(similarity_transform_check(s, std::polar(0.7, 0.3)), 1e-10);
}

TEST(Similarity, UnitCircle) {
    std::mt19937_64 g(34);
    for (int t = 0; t < 10; ++t) {
        const auto s = tmtest::random_system(1 + t % 3, 3 + t % 4, g);
        EXPECT_LT(similarity_transform_check(s, std::polar(1.0, 0.37 * t)), 1e-10);
    }
}

TEST(Similarity, RotationCovariance) {
    std::mt19937_64 g(43);
    for (int t = 0; t < 10; ++t) {
        const auto s = tmtest::random_system(1 + t % 3, 3 + t % 4, g);
        EXPECT_LT(rotation_covariance_check(s, std::polar(0.5 + 0.15 * t, 0.7 * t)), 1e-10);
    }
}

TEST(Similarity, OverflowGuard) {
    const auto s = tmtest::scalar_chain(0.0, 1.0, 1.0, 100);
    EXPECT_THROW(similarity_transform_check(s, std::exp(3.5)), OverflowGuard);
    EXPECT_THROW(similarity_transform_check(s, 0.0), std::invalid_argument);
}

TEST(Determinant, TopEigenvalueOfRing) {
    const LogValue d = det_shifted(demo(), Variant::plain, 1.0, 2.0);
    EXPECT_TRUE(d.is_zero() || d.log_abs < std::log(1e-12));
}

TEST(Determinant, FarEnergyDominates) {
    const LogValue d = det_shifted(demo(), Variant::plain, 1.0, 100.0);
    const cplx ref = (100.0 * Matrix::Identity(3, 3) - build_hamiltonian(demo(), Variant::plain, 1.0).dense).determinant();
    EXPECT_NEAR(d.log_abs, 3.0 * std::log(100.0), 1e-3);
    EXPECT_LT(std::abs(d.value() - ref) / std::abs(ref), 1e-13);
}

TEST(Determinant, CornerFreeIgnoresZ) {
    std::mt19937_64 g(35);
    const auto s = tmtest::random_system(2, 5, g);
    const LogValue a = det_shifted(s, Variant::corner_free, 0.5, {0.3, 0.1});
    const LogValue b = det_shifted(s, Variant::corner_free, 2.0, {0.3, 0.1});
    EXPECT_EQ(a.log_abs, b.log_abs);
    EXPECT_EQ(a.phase, b.phase);
}

TEST(Determinant, MatchesDenseOracleWithSign) {
    std::mt19937_64 g(36);
    for (int t = 0; t < 12; ++t) {
        const auto s = tmtest::random_system(1 + t % 3, 3 + t % 4, g);
        const cplx z = std::polar(0.6 + 0.1 * t, 0.5 * t), e{0.2 * t - 1.0, 0.3};
        const Matrix d = e * Matrix::Identity(s.dim(), s.dim()) - tmtest::dense_plain(s, z);
        const cplx ref = Eigen::FullPivLU<Matrix>(d).determinant();
        const cplx got = det_shifted(s, Variant::plain, z, e).value();
        EXPECT_LT(std::abs(got - ref) / std::abs(ref), 1e-10);
    }
}

TEST(Duality, RandomFamily) {
    std::mt19937_64 g(37);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 10; ++t) {
        const auto s = tmtest::random_system(1 + t % 3, 3 + t % 4, g);
        const cplx e{2 * u(g) - 1, 2 * u(g) - 1};
        for (int j = 0; j < 5; ++j) {
            const cplx z = std::polar(0.5 * std::pow(4.0, u(g)), 2 * kPi * u(g));
            EXPECT_LT(duality_residual(s, e, z), 1e-8);
        }
    }
}

TEST(Duality, CommonZeroAtEigenvalue) {
    const Matrix t = transfer_product(demo(), 3.0).represented();
    Eigen::ComplexEigenSolver<Matrix> es(t, false);
    for (Index a = 0; a < 2; ++a) EXPECT_EQ(duality_residual(demo(), 3.0, es.eigenvalues()(a)), 0.0);
}

// (-z) det[E - H(z)] sampled at five nodes is the quadratic det[T(E) - z].
TEST(Duality, PolynomialIdentityByInterpolation) {
    const cplx e{0.4, 0.2};
    const Matrix t = tmtest::transfer_long(demo(), e).cast<cplx>();
    const cplx nodes[] = {0.5, cplx{0, 1.2}, -1.5, cplx{0.3, -0.9}, 2.0};
    Matrix vander(5, 5);
    Vector vals(5);
    for (int i = 0; i < 5; ++i) {
        const Matrix d = e * Matrix::Identity(3, 3) - tmtest::dense_plain(demo(), nodes[i]);
        vals(i) = -nodes[i] * d.determinant();
        for (int p = 0; p < 5; ++p) vander(i, p) = std::pow(nodes[i], p);
    }
    const Vector c = vander.fullPivLu().solve(vals);
    EXPECT_LT(std::abs(c(4)), 1e-12);
    EXPECT_LT(std::abs(c(3)), 1e-12);
    EXPECT_LT(std::abs(c(2) - 1.0), 1e-12);
    EXPECT_LT(std::abs(c(1) + t.trace()), 1e-12);
    EXPECT_LT(std::abs(c(0) - t.determinant()), 1e-12);
    for (const cplx z : nodes) EXPECT_LT(duality_residual(demo(), e, z), 1e-12);
}

TEST(Corners, BalancedScalarRing) {
    const CornerBlocks c = resolvent_corners_balanced(demo(), 5.0, 1.0);
    const Matrix inv = tmtest::dense_resolvent(tmtest::dense_plain(demo(), 1.0), 5.0);
    EXPECT_LT(std::abs(c.b_11(0, 0) - inv(0, 0)), 1e-15);
    EXPECT_LT(std::abs(c.b_1n(0, 0) - inv(0, 2)), 1e-15);
    EXPECT_LT(std::abs(c.b_n1(0, 0) - inv(2, 0)), 1e-15);
    EXPECT_LT(std::abs(c.b_11(0, 0) - c.b_nn(0, 0)), 1e-15);
}

TEST(Corners, MatchDenseInverseOnRandomSystems) {
    std::mt19937_64 g(38);
    for (int t = 0; t < 24; ++t) {
        const Index m = 1 + t % 3, n = 3 + t % 6;
        const auto s = tmtest::random_system(m, n, g);
        const cplx e{0.3 * (t % 5) - 0.6, 0.2};
        const cplx z = std::polar(std::exp(0.1 * (t % 7) - 0.3), 0.4 * t);
        const Matrix inv = tmtest::dense_resolvent(tmtest::dense_balanced(s, z), e);
        const CornerBlocks c = resolvent_corners_balanced(s, e, z);
        EXPECT_LT(rel(c.b_11, block(inv, m, 0, 0)), 1e-9);
        EXPECT_LT(rel(c.b_1n, block(inv, m, 0, n - 1)), 1e-9);
        EXPECT_LT(rel(c.b_n1, block(inv, m, n - 1, 0)), 1e-9);
        EXPECT_LT(rel(c.b_nn, block(inv, m, n - 1, n - 1)), 1e-9);
        const Matrix invp = tmtest::dense_resolvent(tmtest::dense_plain(s, z), e);
        const CornerBlocks p = resolvent_corners_plain(s, e, z);
        EXPECT_LT(rel(p.b_1n, block(invp, m, 0, n - 1)), 1e-9);
        EXPECT_LT(rel(p.b_n1, block(invp, m, n - 1, 0)), 1e-9);
    }
}

TEST(Corners, PowerScalingBetweenVariants) {
    std::mt19937_64 g(39);
    for (int t = 0; t < 10; ++t) {
        const Index m = 1 + t % 2, n = 3 + t % 4;
        const auto s = tmtest::random_system(m, n, g);
        const cplx w = std::polar(0.8 + 0.05 * t, 0.3 + 0.2 * t), e{0.1, -0.4};
        const cplx wn = std::pow(w, static_cast<int>(n));
        const Matrix gp = tmtest::dense_resolvent(tmtest::dense_plain(s, wn), e);
        const Matrix gb = tmtest::dense_resolvent(tmtest::dense_balanced(s, w), e);
        // G(E, w^n)_ab = w^(a-b) G^B(E, w)_ab
        const cplx up = std::pow(w, static_cast<int>(1 - n)), down = std::pow(w, static_cast<int>(n - 1));
        EXPECT_LT(rel(block(gp, m, 0, n - 1), up * block(gb, m, 0, n - 1)), 1e-8);
        EXPECT_LT(rel(block(gp, m, n - 1, 0), down * block(gb, m, n - 1, 0)), 1e-8);
        const CornerBlocks cp = resolvent_corners_plain(s, e, wn), cb = resolvent_corners_balanced(s, e, w);
        EXPECT_LT(rel(wn * cp.b_1n, w * cb.b_1n), 1e-8);
    }
}

TEST(Corners, HermitianDiagonalCornerOnUnitCircle) {
    std::mt19937_64 g(40);
    const auto s = tmtest::random_hermitian(2, 5, g);
    const Matrix h = tmtest::dense_balanced(s, std::polar(1.0, 0.3));
    ASSERT_LT((h - h.adjoint()).norm(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    const double e = 0.5 * (es.eigenvalues()(3) + es.eigenvalues()(4));
    const CornerBlocks c = resolvent_corners_balanced(s, e, std::polar(1.0, 0.3));
    EXPECT_LT((c.b_11 - c.b_11.adjoint()).norm(), 1e-10);
}

TEST(Corners, OnSpectrumIsACollision) {
    EXPECT_THROW(resolvent_corners_balanced(demo(), 2.0, 1.0), SpectrumCollision);
    EXPECT_THROW(resolvent_corners_open(demo(), 0.0), SpectrumCollision);
    EXPECT_THROW(resolvent_corners_open(demo(), std::sqrt(2.0)), SpectrumCollision);
}

TEST(OpenCorners, ScalarChain) {
    const CornerBlocks c = resolvent_corners_open(demo(), 5.0);
    const Matrix inv = tmtest::dense_resolvent(m3({0, 1, 0, 1, 0, 1, 0, 1, 0}), 5.0);
    EXPECT_EQ(c.source, CornerSource::open);
    EXPECT_LT(std::abs(c.b_11(0, 0) - inv(0, 0)), 1e-15);
    EXPECT_LT(std::abs(c.b_1n(0, 0) - inv(0, 2)), 1e-15);
    EXPECT_LT(std::abs(c.b_n1(0, 0) - inv(2, 0)), 1e-15);
    EXPECT_LT(std::abs(c.b_nn(0, 0) - inv(2, 2)), 1e-15);
}

TEST(OpenCorners, DecouplingLimit) {
    std::mt19937_64 g(41);
    const auto r = tmtest::random_system(2, 4, g);
    std::vector<Matrix> b, c;
    for (Index k = 0; k < 4; ++k) {
        b.push_back(1e-8 * Matrix::Identity(2, 2));
        c.push_back(1e-8 * Matrix::Identity(2, 2));
    }
    const BlockTridiagonalSystem s(2, r.As(), b, c);
    const CornerBlocks corners = resolvent_corners_open(s, {0.1, 0.7});
    EXPECT_LT(corners.b_1n.norm(), 1e-6);
    EXPECT_LT(corners.b_n1.norm(), 1e-6);
}

TEST(OpenCorners, DiagonalSites) {
    std::vector<Matrix> a, b, c;
    const double sites[] = {0.5, -1.0, 2.0, 0.25, -0.75};
    for (double x : sites) {
        a.push_back(x * Matrix::Identity(2, 2));
        b.push_back(Matrix::Identity(2, 2));
        c.push_back(Matrix::Identity(2, 2));
    }
    const BlockTridiagonalSystem s(2, a, b, c);
    const Matrix inv = tmtest::dense_resolvent(tmtest::dense_open(s), 0.3);
    const CornerBlocks g = resolvent_corners_open(s, 0.3);
    EXPECT_TRUE(all_finite(g.b_11));
    EXPECT_LT(rel(g.b_11, block(inv, 2, 0, 0)), 1e-13);
    EXPECT_LT(rel(g.b_1n, block(inv, 2, 0, 4)), 1e-12);
}

TEST(OpenCorners, IndependentOfRingCorners) {
    std::mt19937_64 g(42);
    const auto s = tmtest::random_system(3, 6, g);
    const Matrix inv = tmtest::dense_resolvent(tmtest::dense_open(s), {0.2, 0.2});
    const CornerBlocks c = resolvent_corners_open(s, {0.2, 0.2});
    EXPECT_LT(rel(c.b_1n, block(inv, 3, 0, 5)), 1e-10);
    EXPECT_LT(rel(c.b_nn, block(inv, 3, 5, 5)), 1e-10);
}
