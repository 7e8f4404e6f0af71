// anderson.hpp: quasi-1D Anderson bars and their clean-limit exponents.
//
// Each slice is a wx x wy square lattice with hard-wall transverse edges and unit
// hopping; neighbouring slices are coupled by B_k = C_k = I. Site energies are
// uniform on [-w/2, w/2), drawn from std::mt19937_64 slice by slice, sites in
// row-major order (site index y * wx + x).

#pragma once

#include "tmcount/operators.hpp"
#include "tmcount/transfer.hpp"

#include "json.hpp"

#include <cstdint>
#include <random>

namespace tmcount {

struct AndersonConfig {
    Index wx{1};
    Index wy{1};
    Index length{3};
    double disorder_w{0.0};
    std::uint64_t seed{0};
    double energy{0.0};

    Index m() const { return wx * wy; }
};

inline constexpr const char* kAndersonGenerator = "mt19937_64";

inline void check_config(const AndersonConfig& cfg) {
    if (cfg.wx < 1 || cfg.wy < 1) throw std::invalid_argument("anderson: wx and wy must be positive");
    if (cfg.length < 3) throw std::invalid_argument("anderson: length must be at least 3");
    if (!(cfg.disorder_w >= 0.0) || !std::isfinite(cfg.disorder_w)) {
        throw std::invalid_argument("anderson: disorder must be a finite non-negative number");
    }
}

inline Matrix build_slice(const AndersonConfig& cfg, const std::vector<double>& eps) {
    const Index m = cfg.m();
    if (static_cast<Index>(eps.size()) != m) throw std::invalid_argument("build_slice: need one energy per site");
    Matrix a = Matrix::Zero(m, m);
    for (Index y = 0; y < cfg.wy; ++y) {
        for (Index x = 0; x < cfg.wx; ++x) {
            const Index s = y * cfg.wx + x;
            a(s, s) = eps[static_cast<std::size_t>(s)];
            if (x + 1 < cfg.wx) a(s, s + 1) = a(s + 1, s) = 1.0;
            if (y + 1 < cfg.wy) a(s, s + cfg.wx) = a(s + cfg.wx, s) = 1.0;
        }
    }
    return a;
}

// Uniform on [-w/2, w/2) from the top 53 bits of one draw.
class DisorderStream {
public:
    DisorderStream(std::uint64_t seed, double w) : gen_(seed), w_(w) {}

    double next() {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return w_ * (u - 0.5);
    }

private:
    std::mt19937_64 gen_;
    double w_;
};

inline BlockTridiagonalSystem generate(const AndersonConfig& cfg) {
    check_config(cfg);
    const Index m = cfg.m();
    DisorderStream draws(cfg.seed, cfg.disorder_w);
    std::vector<Matrix> a, b, c;
    std::vector<double> eps(static_cast<std::size_t>(m));
    for (Index k = 0; k < cfg.length; ++k) {
        for (auto& e : eps) e = draws.next();
        a.push_back(build_slice(cfg, eps));
        b.push_back(Matrix::Identity(m, m));
        c.push_back(Matrix::Identity(m, m));
    }
    return BlockTridiagonalSystem(m, std::move(a), std::move(b), std::move(c));
}

inline nlohmann::json anderson_meta(const AndersonConfig& cfg) {
    return {{"wx", cfg.wx},
            {"wy", cfg.wy},
            {"w", cfg.disorder_w},
            {"seed", cfg.seed},
            {"generator", kAndersonGenerator},
            {"transverse_boundary", "open"}};
}

// Transverse modes mu_pq = 2 cos(p pi / (wx+1)) + 2 cos(q pi / (wy+1)); each mode gives
// +-arccosh(|E - mu| / 2) outside the band and a zero pair inside it.
inline ExponentSet clean_limit_exponents(const AndersonConfig& cfg) {
    check_config(cfg);
    if (cfg.disorder_w != 0.0) throw std::invalid_argument("clean_limit_exponents: needs w = 0");
    ExponentSet out;
    for (Index p = 1; p <= cfg.wx; ++p) {
        for (Index q = 1; q <= cfg.wy; ++q) {
            const double mu = 2.0 * std::cos(p * kPi / static_cast<double>(cfg.wx + 1)) +
                              2.0 * std::cos(q * kPi / static_cast<double>(cfg.wy + 1));
            const double d = std::abs(cfg.energy - mu);
            const double x = d > 2.0 ? std::acosh(d / 2.0) : 0.0;
            out.xs.push_back(-x);
            out.xs.push_back(x);
        }
    }
    std::sort(out.xs.begin(), out.xs.end());
    return out;
}

}  // namespace tmcount
