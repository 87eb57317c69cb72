#include <gtest/gtest.h>

#include <random>

#include "opstab/spectral.hpp"

using namespace opstab;

namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index m) {
    std::normal_distribution<double> g;
    Matrix a(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) a(i, j) = Complex(g(rng), g(rng));
    return a;
}

/// Gram-Schmidt on the columns of a random matrix.
Matrix gram_schmidt_unitary(std::mt19937_64& rng, Eigen::Index m) {
    Matrix a = random_matrix(rng, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index k = 0; k < j; ++k) a.col(j) -= a.col(k).dot(a.col(j)) * a.col(k);
        a.col(j) /= a.col(j).norm();
    }
    return a;
}

/// Characteristic polynomial coefficients (monic, highest first) by Faddeev-LeVerrier.
std::vector<Complex> char_poly(const Matrix& a) {
    const Eigen::Index m = a.rows();
    std::vector<Complex> c(static_cast<std::size_t>(m) + 1);
    c[0] = 1.0;
    Matrix mk = Matrix::Zero(m, m);
    for (Eigen::Index k = 1; k <= m; ++k) {
        mk = a * mk + c[static_cast<std::size_t>(k - 1)] * Matrix::Identity(m, m);
        c[static_cast<std::size_t>(k)] = -(a * mk).trace() / static_cast<double>(k);
    }
    return c;
}

/// Durand-Kerner iteration for all roots.
std::vector<Complex> poly_roots(const std::vector<Complex>& c) {
    const std::size_t m = c.size() - 1;
    std::vector<Complex> z(m);
    for (std::size_t i = 0; i < m; ++i) z[i] = std::pow(Complex(0.4, 0.9), static_cast<double>(i));
    auto eval = [&](Complex x) {
        Complex s = 0.0;
        for (Complex k : c) s = s * x + k;
        return s;
    };
    for (int it = 0; it < 2000; ++it)
        for (std::size_t i = 0; i < m; ++i) {
            Complex d = 1.0;
            for (std::size_t j = 0; j < m; ++j)
                if (j != i) d *= z[i] - z[j];
            z[i] -= eval(z[i]) / d;
        }
    return z;
}

/// Max over a of min over b of |a - b|, for equal-size multisets matched greedily.
double multiset_gap(std::vector<Complex> a, std::vector<Complex> b) {
    double worst = 0.0;
    for (Complex x : a) {
        auto it = std::min_element(b.begin(), b.end(), [&](Complex p, Complex q) { return std::abs(p - x) < std::abs(q - x); });
        worst = std::max(worst, std::abs(*it - x));
        b.erase(it);
    }
    return worst;
}

std::vector<Complex> values_of(const DenseEigen& e) {
    std::vector<Complex> v;
    for (const auto& p : e.pairs) v.push_back(p.value);
    return v;
}

} // namespace

TEST(DenseEigen, SwapMatrix) {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = a(1, 0) = 1.0;
    const auto e = dense_eigen(a);
    EXPECT_LE(multiset_gap(values_of(e), {1.0, -1.0}), 1e-12);
    EXPECT_TRUE(e.normal);
}

TEST(DenseEigen, Diagonal) {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = Complex(0.0, 1.0);
    a(1, 1) = 0.5;
    EXPECT_LE(multiset_gap(values_of(dense_eigen(a)), {Complex(0.0, 1.0), 0.5}), 1e-12);
}

TEST(DenseEigen, NilpotentIsDefective) {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = 1.0;
    const auto e = dense_eigen(a);
    ASSERT_EQ(e.pairs.size(), 2u);
    for (const auto& p : e.pairs) EXPECT_LT(std::abs(p.value), 1e-6);
}

TEST(DenseEigen, MatchesCharacteristicPolynomialRoots) {
    std::mt19937_64 rng(21);
    for (Eigen::Index m = 1; m <= 4; ++m)
        for (int t = 0; t < 20; ++t) {
            const Matrix a = random_matrix(rng, m);
            const auto e = dense_eigen(a);
            ASSERT_EQ(e.pairs.size(), static_cast<std::size_t>(m));
            EXPECT_LE(multiset_gap(values_of(e), poly_roots(char_poly(a))), 1e-8 * std::max(1.0, a.norm()));
        }
}

TEST(DenseEigen, RandomUnitaryHasUnimodularSpectrum) {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 10; ++t) {
        const Matrix q = gram_schmidt_unitary(rng, 8);
        const auto e = dense_eigen(q);
        ASSERT_EQ(e.pairs.size(), 8u);
        for (const auto& p : e.pairs) EXPECT_NEAR(std::abs(p.value), 1.0, 1e-8);
    }
    const Matrix q4 = gram_schmidt_unitary(rng, 4);
    EXPECT_LE(multiset_gap(values_of(dense_eigen(q4)), poly_roots(char_poly(q4))), 1e-8);
}

TEST(DenseEigen, ResidualBound) {
    std::mt19937_64 rng(23);
    for (Eigen::Index m : {5, 16, 40}) {
        const Matrix a = random_matrix(rng, m);
        const auto e = dense_eigen(a);
        EXPECT_FALSE(e.partial);
        const double scale = a.operatorNorm();
        for (const auto& p : e.pairs) EXPECT_LE((a * p.vector - p.value * p.vector).norm(), 1e-8 * scale * p.vector.norm());
    }
}

TEST(DenseEigen, RepeatedEigenvaluesGiveOrthonormalClusters) {
    std::mt19937_64 rng(24);
    const Matrix q = gram_schmidt_unitary(rng, 6);
    ColumnVector d(6);
    d << 1.0, 1.0, 1.0, Complex(0.0, 1.0), Complex(0.0, 1.0), -1.0;
    const Matrix a = q * d.asDiagonal() * q.adjoint();
    const auto e = dense_eigen(a);
    for (std::size_t i = 0; i < e.pairs.size(); ++i)
        for (std::size_t j = i + 1; j < e.pairs.size(); ++j)
            if (std::abs(e.pairs[i].value - e.pairs[j].value) < 1e-6)
                EXPECT_LT(std::abs(e.pairs[i].vector.dot(e.pairs[j].vector)), 1e-8);
}

TEST(DenseEigen, CapEnforced) { EXPECT_THROW(dense_eigen(Matrix::Identity(600, 600)), CapacityError); }
