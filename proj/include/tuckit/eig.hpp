#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "tuckit/tensor.hpp"

namespace tuckit {

/// Spectrum of a symmetric matrix. Eigenvalues are non-increasing and column
/// i of vectors pairs with eigenvalue i. Each column is normalized so that
/// its entry of largest magnitude (first such entry on ties) is positive.
struct EigResult {
    DVec eigenvalues;
    Matrix vectors;
};

/// Flips every column whose largest-magnitude entry is negative. Applying
/// the same convention on both sides makes eigenbases comparable even though
/// eigenvector signs are otherwise arbitrary.
inline void fix_column_signs(Matrix& m) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double a = std::abs(m(r, c));
            if (a > best) {
                best = a;
                arg = r;
            }
        }
        if (m(arg, c) < 0.0)
            for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = -m(r, c);
    }
}

/// Full spectrum of a symmetric matrix via cyclic Jacobi sweeps. The sweep
/// order, sort, and sign convention are fixed, so identical input bytes give
/// identical output bytes on every call.
inline EigResult eig_sym(Matrix s) {
    const std::size_t n = s.rows();
    if (n == 0 || s.cols() != n)
        throw std::invalid_argument("eigensolver requires a square matrix");
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::abs(s(i, j)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(s(i, j) - s(j, i)) > 1e-12 * std::max(scale, 1e-300))
                throw std::invalid_argument("matrix is not symmetric");

    Matrix a = std::move(s);
    Matrix v = Matrix::identity(n);
    double fro = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) fro += a(i, j) * a(i, j);
    fro = std::sqrt(fro);
    const double tol = 1e-14 * std::max(fro, 1e-300);
    constexpr std::size_t kMaxSweeps = 64;

    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
        if (std::sqrt(off) <= tol) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = theta >= 0.0
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = t * c;
                const double tau = sn / (1.0 + c);
                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = akp - sn * (akq + tau * akp);
                    a(p, k) = a(k, p);
                    a(k, q) = akq + sn * (akp - tau * akq);
                    a(q, k) = a(k, q);
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = vkp - sn * (vkq + tau * vkp);
                    v(k, q) = vkq + sn * (vkp - tau * vkq);
                }
            }
        }
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t l, std::size_t r) { return a(l, l) > a(r, r); });

    EigResult out;
    out.eigenvalues.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        out.eigenvalues[c] = a(idx[c], idx[c]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, idx[c]);
    }
    fix_column_signs(out.vectors);
    return out;
}

/// Leading eigenpairs of a symmetric matrix, by count.
inline EigResult eig_leading(Matrix s, std::size_t count) {
    const std::size_t n = s.rows();
    if (count == 0 || count > n)
        throw std::invalid_argument("leading eigenpair count out of range");
    EigResult full = eig_sym(std::move(s));
    if (count == n) return full;
    EigResult out;
    out.eigenvalues.assign(full.eigenvalues.begin(),
                           full.eigenvalues.begin() + static_cast<std::ptrdiff_t>(count));
    out.vectors = Matrix(n, count);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < count; ++c) out.vectors(r, c) = full.vectors(r, c);
    return out;
}

}  // namespace tuckit
