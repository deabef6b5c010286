#pragma once

/// Reproducible synthetic test data: tensors formed from a random Tucker
/// decomposition with known core ranks, plus optional white noise scaled
/// relative to the signal norm.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "tuckit/decompose.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

namespace detail {

/// Draws a rows x cols matrix with orthonormal columns: standard normal
/// entries followed by modified Gram-Schmidt with one re-orthogonalization
/// pass.  Degenerate columns (never observed in practice for cols <= rows)
/// are redrawn from the same generator.
inline Matrix random_orthonormal_columns(std::size_t rows, std::size_t cols,
                                         std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) m(r, c) = normal(rng);
    }
    for (std::size_t c = 0; c < cols; ++c) {
        for (int attempt = 0;; ++attempt) {
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t prev = 0; prev < c; ++prev) {
                    double dot = 0.0;
                    for (std::size_t r = 0; r < rows; ++r) dot += m(r, prev) * m(r, c);
                    for (std::size_t r = 0; r < rows; ++r) m(r, c) -= dot * m(r, prev);
                }
            }
            double norm_sq = 0.0;
            for (std::size_t r = 0; r < rows; ++r) norm_sq += m(r, c) * m(r, c);
            const double norm = std::sqrt(norm_sq);
            if (norm > 1e-8) {
                for (std::size_t r = 0; r < rows; ++r) m(r, c) /= norm;
                break;
            }
            if (attempt > 64) {
                throw std::runtime_error("could not orthonormalize a random column");
            }
            for (std::size_t r = 0; r < rows; ++r) m(r, c) = normal(rng);
        }
    }
    return m;
}

}  // namespace detail

/// Generates X = G x {U} + noise_level * |G x {U}| / sqrt(I) * E where G is
/// a standard-normal core of the given ranks, each U^(n) is a random
/// dims[n] x ranks[n] matrix with orthonormal columns, E has standard-normal
/// entries, and I is the total element count.  All draws come from one
/// mt19937_64 seeded as given (core first, then factors in mode order, then
/// noise), so equal arguments produce identical tensors.  noise_level = 0
/// yields a tensor whose mode-n ranks are exactly the requested ranks.
inline DenseTensor generate_synthetic(std::span<const std::size_t> dims,
                                      std::span<const std::size_t> ranks,
                                      double noise_level, std::uint64_t seed) {
    if (dims.empty() || dims.size() != ranks.size()) {
        throw std::invalid_argument("dims and ranks must have the same nonzero length");
    }
    for (std::size_t n = 0; n < dims.size(); ++n) {
        if (ranks[n] == 0 || ranks[n] > dims[n]) {
            throw std::invalid_argument("ranks must satisfy 1 <= rank <= dim");
        }
    }
    if (noise_level < 0.0) {
        throw std::invalid_argument("noise level must be nonnegative");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    DenseTensor core(std::vector<std::size_t>(ranks.begin(), ranks.end()));
    for (std::size_t i = 0; i < core.size(); ++i) core.data()[i] = normal(rng);

    DenseTensor x = std::move(core);
    for (std::size_t n = 0; n < dims.size(); ++n) {
        const Matrix u = detail::random_orthonormal_columns(dims[n], ranks[n], rng);
        x = ttm(x, u, n, /*transpose=*/false);
    }
    if (noise_level > 0.0) {
        const double scale =
            noise_level * x.norm() / std::sqrt(static_cast<double>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += scale * normal(rng);
    }
    return x;
}

}  // namespace tuckit
