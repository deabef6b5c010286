#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"
#include "tuckit/eig.hpp"

using tuckit::EigResult;
using tuckit::Matrix;

namespace {

Matrix diag(const std::vector<double>& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

Matrix random_symmetric_psd(std::size_t n, std::uint64_t seed) {
    const Matrix m = testutil::random_matrix(n + 2, n, seed);
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n + 2; ++k) acc += m(k, i) * m(k, j);
            s(i, j) = acc;
        }
    return s;
}

double residual(const Matrix& s, const EigResult& e) {
    double worst = 0.0;
    for (std::size_t c = 0; c < e.vectors.cols(); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < s.rows(); ++i) {
            double av = 0.0;
            for (std::size_t j = 0; j < s.cols(); ++j) av += s(i, j) * e.vectors(j, c);
            const double r = av - e.eigenvalues[c] * e.vectors(i, c);
            acc += r * r;
        }
        worst = std::max(worst, std::sqrt(acc));
    }
    return worst;
}

double fro(const Matrix& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < s.rows(); ++i)
        for (std::size_t j = 0; j < s.cols(); ++j) acc += s(i, j) * s(i, j);
    return std::sqrt(acc);
}

}  // namespace

TEST(EigSym, DiagonalMatrix) {
    const EigResult e = tuckit::eig_sym(diag({3.0, 2.0, 1.0}));
    ASSERT_EQ(e.eigenvalues.size(), 3u);
    EXPECT_EQ(e.eigenvalues[0], 3.0);
    EXPECT_EQ(e.eigenvalues[1], 2.0);
    EXPECT_EQ(e.eigenvalues[2], 1.0);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(e.vectors(r, c), r == c ? 1.0 : 0.0);
}

TEST(EigSym, IdentityMatrix) {
    const EigResult e = tuckit::eig_sym(Matrix::identity(3));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(e.eigenvalues[i], 1.0);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(e.vectors(r, c), r == c ? 1.0 : 0.0);
}

TEST(EigSym, RandomPsdSpectrum) {
    const Matrix s = random_symmetric_psd(8, 101);
    const EigResult e = tuckit::eig_sym(s);

    for (std::size_t i = 0; i + 1 < 8; ++i)
        EXPECT_GE(e.eigenvalues[i], e.eigenvalues[i + 1]);

    double trace = 0.0;
    for (std::size_t i = 0; i < 8; ++i) trace += s(i, i);
    double lsum = 0.0;
    for (const double l : e.eigenvalues) lsum += l;
    EXPECT_NEAR(lsum, trace, 1e-12 * trace);

    EXPECT_LE(residual(s, e), 1e-10 * fro(s));

    // Orthonormal columns.
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b) {
            double dot = 0.0;
            for (std::size_t r = 0; r < 8; ++r) dot += e.vectors(r, a) * e.vectors(r, b);
            EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-12);
        }

    // Sign convention: largest-magnitude entry of each column is positive.
    for (std::size_t c = 0; c < 8; ++c) {
        double best = 0.0;
        double signed_best = 0.0;
        for (std::size_t r = 0; r < 8; ++r)
            if (std::abs(e.vectors(r, c)) > best) {
                best = std::abs(e.vectors(r, c));
                signed_best = e.vectors(r, c);
            }
        EXPECT_GT(signed_best, 0.0);
    }
}

TEST(EigSym, RepeatedEigenvalues) {
    // Rotate diag(2, 2, 1) by a fixed orthogonal matrix; spectrum must survive.
    const double c = std::cos(0.7);
    const double s = std::sin(0.7);
    Matrix q(3, 3, std::vector<double>{c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0});
    Matrix m(3, 3);
    const std::vector<double> d = {2.0, 2.0, 1.0};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 3; ++k) acc += q(i, k) * d[k] * q(j, k);
            m(i, j) = acc;
        }
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) m(j, i) = m(i, j);
    const EigResult e = tuckit::eig_sym(m);
    EXPECT_NEAR(e.eigenvalues[0], 2.0, 1e-12);
    EXPECT_NEAR(e.eigenvalues[1], 2.0, 1e-12);
    EXPECT_NEAR(e.eigenvalues[2], 1.0, 1e-12);
    EXPECT_LE(residual(m, e), 1e-10 * fro(m));
}

TEST(EigSym, RejectsAsymmetricInput) {
    Matrix m(2, 2, std::vector<double>{1.0, 2.0, 3.0, 4.0});
    EXPECT_THROW((void)tuckit::eig_sym(m), std::invalid_argument);
    Matrix rect(2, 3);
    EXPECT_THROW((void)tuckit::eig_sym(rect), std::invalid_argument);
}

TEST(EigSym, DeterministicAcrossCalls) {
    const Matrix s = random_symmetric_psd(7, 102);
    const EigResult a = tuckit::eig_sym(s);
    const EigResult b = tuckit::eig_sym(s);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(a.eigenvalues[i], b.eigenvalues[i]);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(a.vectors(r, c), b.vectors(r, c));
}

TEST(EigLeading, TakesLeadingPairs) {
    const EigResult e = tuckit::eig_leading(diag({4.0, 3.0, 2.0, 1.0}), 2);
    ASSERT_EQ(e.eigenvalues.size(), 2u);
    EXPECT_EQ(e.eigenvalues[0], 4.0);
    EXPECT_EQ(e.eigenvalues[1], 3.0);
    ASSERT_EQ(e.vectors.rows(), 4u);
    ASSERT_EQ(e.vectors.cols(), 2u);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(e.vectors(r, c), r == c ? 1.0 : 0.0);
    EXPECT_THROW((void)tuckit::eig_leading(diag({1.0}), 2), std::invalid_argument);
    EXPECT_THROW((void)tuckit::eig_leading(diag({1.0}), 0), std::invalid_argument);
}
