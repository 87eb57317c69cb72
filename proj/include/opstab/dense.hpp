#pragma once

// Dense complex matrices: operator norm by power iteration on A*A and the
// unitary polar factor by scaled Newton iteration.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "opstab/error.hpp"
#include "opstab/space.hpp"

namespace opstab {

using Matrix = Eigen::MatrixXcd;
using ColumnVector = Eigen::VectorXcd;

inline constexpr std::size_t kDenseDimensionCap = 512;

inline void check_dense_dimension(const Matrix& a, std::size_t cap = kDenseDimensionCap) {
    if (a.rows() != a.cols()) throw DomainError("dense operator must be square");
    if (static_cast<std::size_t>(a.rows()) > cap)
        throw CapacityError("dense dimension " + std::to_string(a.rows()) + " exceeds cap " + std::to_string(cap));
}

namespace detail {

inline ColumnVector seeded_start(Eigen::Index m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    ColumnVector v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = Complex(g(rng), g(rng));
    return v / v.norm();
}

} // namespace detail

/// Largest singular value by power iteration on A*A. Stops when the Rayleigh
/// residual certifies an eigenvalue of A*A within 1e-10 relative; throws
/// NumericalError carrying the best estimate when the cap is reached.
inline double operator_norm_estimate(const Matrix& a, int max_iterations = 20000,
                                     std::size_t cap = kDenseDimensionCap) {
    check_dense_dimension(a, cap);
    if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0.0;
    ColumnVector v = detail::seeded_start(a.cols(), 0x5eedULL);
    double lambda = 0.0;
    for (int k = 0; k < max_iterations; ++k) {
        const ColumnVector w = a.adjoint() * (a * v);
        lambda = std::real(v.dot(w));
        const double residual = (w - lambda * v).norm();
        if (residual <= 1e-10 * lambda) return std::sqrt(lambda);
        const double wn = w.norm();
        if (wn == 0.0) return 0.0;
        v = w / wn;
    }
    throw NumericalError("power iteration did not converge", std::sqrt(std::max(lambda, 0.0)));
}

struct PolarFactor {
    Matrix unitary;
    bool regularized = false;
    double shift = 0.0;
    int iterations = 0;
    double unitarity_residual = 0.0; ///< Frobenius norm of Q*Q - I
};

/// Unitary factor Q of T = Q P. A singular T is shifted to T + sigma I first,
/// so the factor is one admissible choice, not a canonical one.
inline PolarFactor unitary_polar_factor(const Matrix& t) {
    check_dense_dimension(t);
    const Eigen::Index m = t.rows();
    PolarFactor out;
    if (m == 0) {
        out.unitary = t;
        return out;
    }
    Matrix x = t;
    const double scale = std::max(1.0, t.norm());
    Eigen::PartialPivLU<Matrix> lu(x);
    double min_pivot = std::abs(lu.matrixLU()(0, 0));
    for (Eigen::Index i = 1; i < m; ++i) min_pivot = std::min(min_pivot, std::abs(lu.matrixLU()(i, i)));
    if (min_pivot <= 1e-12 * scale || !std::isfinite(lu.rcond()) || lu.rcond() < 1e-14) {
        out.regularized = true;
        out.shift = 1e-6 * scale;
        x += out.shift * Matrix::Identity(m, m);
    }
    const Matrix eye = Matrix::Identity(m, m);
    bool scaling = true;
    for (int k = 0; k < 100; ++k) {
        const Matrix inv = x.partialPivLu().inverse();
        if (!inv.allFinite()) throw NumericalError("polar iteration broke down: singular iterate");
        const double gamma = scaling ? std::sqrt(inv.norm() / x.norm()) : 1.0;
        const Matrix next = 0.5 * (gamma * x + inv.adjoint() / gamma);
        const double change = (next - x).norm();
        x = next;
        out.iterations = k + 1;
        if (change < 1e-2) scaling = false;
        if (change <= 1e-14 * std::sqrt(static_cast<double>(m))) break;
    }
    out.unitarity_residual = (x.adjoint() * x - eye).norm();
    if (!(out.unitarity_residual <= 1e-8))
        throw NumericalError("polar iteration did not reach a unitary factor", out.unitarity_residual);
    out.unitary = std::move(x);
    return out;
}

} // namespace opstab
