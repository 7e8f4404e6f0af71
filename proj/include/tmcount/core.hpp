// core.hpp: scalar/matrix aliases, error types and log-scaled scalars shared by all modules.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

namespace tmcount {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;

// ------------------------------------------------------------------ errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file (JSON syntax or schema).
class ParseError : public Error {
public:
    using Error::Error;
};

// A system that violates the structural premises (shape, n >= 3, nonsingular B/C).
class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// E is (numerically) an eigenvalue of the operator being inverted: the contour
// touches the spectrum, or the energy sits on the spectrum of h.
class SpectrumCollision : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// An explicit power z^n would leave double range; the balanced path must be used.
class OverflowGuard : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// ------------------------------------------------------------- log scalars

// phase * exp(log_abs); phase has unit modulus, zero is log_abs = -inf.
struct LogValue {
    cplx phase{1.0, 0.0};
    double log_abs{0.0};

    static LogValue zero() { return {cplx{1.0, 0.0}, -std::numeric_limits<double>::infinity()}; }

    static LogValue from(cplx v) {
        const double a = std::abs(v);
        if (a == 0.0) return zero();
        return {v / a, std::log(a)};
    }

    bool is_zero() const { return std::isinf(log_abs) && log_abs < 0; }

    // Value as an ordinary complex number; overflows to inf when out of range.
    cplx value() const { return is_zero() ? cplx{} : phase * std::exp(log_abs); }

    LogValue& operator*=(const LogValue& o) {
        phase *= o.phase;
        phase /= std::abs(phase);
        log_abs += o.log_abs;
        return *this;
    }
    friend LogValue operator*(LogValue a, const LogValue& b) { return a *= b; }
};

// Relative difference |a-b| / (|a|+|b|) evaluated without leaving log space;
// two exact zeros give 0.
inline double relative_difference(const LogValue& a, const LogValue& b) {
    if (a.is_zero() && b.is_zero()) return 0.0;
    const double top = std::max(a.log_abs, b.log_abs);
    const cplx va = a.is_zero() ? cplx{} : a.phase * std::exp(a.log_abs - top);
    const cplx vb = b.is_zero() ? cplx{} : b.phase * std::exp(b.log_abs - top);
    return std::abs(va - vb) / (std::abs(va) + std::abs(vb));
}

inline double inf_norm(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline bool all_finite(const Matrix& m) {
    return m.array().isFinite().all();
}

}  // namespace tmcount
