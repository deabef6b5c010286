#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tuckit/eig.hpp"
#include "tuckit/kernels.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

enum class ModeOrderStrategy { natural, greedy_flops, max_compression_ratio, explicit_order };

struct DecomposeOptions {
    double epsilon = 0.0;
    ModeOrderStrategy order_strategy = ModeOrderStrategy::natural;
    std::vector<std::size_t> explicit_order;
    std::size_t max_hooi_iters = 25;
    double hooi_rel_tol = 1e-6;
};

/// Truncated Tucker representation: a core tensor and one factor matrix with
/// orthonormal columns per mode, plus the norm of the tensor it was fit to.
struct TuckerModel {
    DenseTensor core;
    std::vector<Matrix> factors;
    double original_norm = 0.0;

    [[nodiscard]] std::vector<std::size_t> ranks() const {
        std::vector<std::size_t> r;
        for (const Matrix& u : factors) r.push_back(u.cols());
        return r;
    }

    [[nodiscard]] std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d;
        for (const Matrix& u : factors) d.push_back(u.rows());
        return d;
    }
};

namespace detail {

/// Eigenvalues within 1e-12 * lambda_1 of zero are roundoff artifacts of the
/// Gram evaluation; tail sums treat them as exact zeros so that exactly
/// rank-deficient data yields exact tails. Values more negative than the
/// band are rejected.
inline std::vector<double> clipped_spectrum(std::span<const double> eigenvalues) {
    const double head = eigenvalues.front();
    const double band = 1e-12 * std::max(head, 0.0);
    double prev = std::numeric_limits<double>::infinity();
    std::vector<double> out;
    out.reserve(eigenvalues.size());
    for (const double l : eigenvalues) {
        if (l < -band) throw std::invalid_argument("negative eigenvalue in spectrum");
        if (l > prev + band)
            throw std::invalid_argument("spectrum is not non-increasing");
        prev = l;
        out.push_back(std::abs(l) <= band ? 0.0 : l);
    }
    return out;
}

}  // namespace detail

/// Smallest rank whose discarded eigenvalue tail fits within this mode's
/// share of the squared error budget, epsilon^2 * norm_sq / order. The tail
/// is accumulated from the smallest eigenvalues upward over the clipped
/// spectrum.
inline std::size_t choose_rank(std::span<const double> eigenvalues, double norm_sq,
                               double epsilon, std::size_t order) {
    if (eigenvalues.empty()) throw std::invalid_argument("empty spectrum");
    if (epsilon < 0.0) throw std::invalid_argument("tolerance must be non-negative");
    if (norm_sq < 0.0) throw std::invalid_argument("squared norm must be non-negative");
    if (order == 0) throw std::invalid_argument("tensor order must be positive");
    const std::vector<double> lambda = detail::clipped_spectrum(eigenvalues);
    const std::size_t n = lambda.size();
    std::vector<double> tail(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + lambda[i];
    const double budget = epsilon * epsilon * norm_sq / static_cast<double>(order);
    for (std::size_t r = 1; r <= n; ++r)
        if (tail[r] <= budget) return r;
    return n;
}

/// Orders modes for sequential truncation. The greedy strategy picks, at each
/// step, the unprocessed mode whose Gram + eigensolve + product work
/// 2*J*I_n + (10/3)*I_n^3 + 2*J*R_n is smallest given the current running
/// size J; the ratio strategy sorts by I_n / R_n descending. Ties fall back
/// to ascending mode index, so equal shapes yield the natural order.
inline std::vector<std::size_t> order_modes(std::span<const std::size_t> dims,
                                            std::span<const std::size_t> estimated_ranks,
                                            ModeOrderStrategy strategy,
                                            std::span<const std::size_t> explicit_order = {}) {
    const std::size_t n = dims.size();
    if (n == 0) throw std::invalid_argument("tensor order must be positive");
    std::vector<std::size_t> natural(n);
    std::iota(natural.begin(), natural.end(), std::size_t{0});

    if (strategy == ModeOrderStrategy::natural) return natural;

    if (strategy == ModeOrderStrategy::explicit_order) {
        if (explicit_order.size() != n)
            throw std::invalid_argument("explicit order length does not match order");
        std::vector<bool> seen(n, false);
        for (const std::size_t m : explicit_order) {
            if (m >= n || seen[m])
                throw std::invalid_argument("explicit order is not a permutation");
            seen[m] = true;
        }
        return {explicit_order.begin(), explicit_order.end()};
    }

    if (estimated_ranks.size() != n)
        throw std::invalid_argument("estimated rank count does not match order");
    for (std::size_t m = 0; m < n; ++m)
        if (estimated_ranks[m] == 0 || estimated_ranks[m] > dims[m])
            throw std::invalid_argument("estimated rank out of range");

    if (strategy == ModeOrderStrategy::max_compression_ratio) {
        std::vector<std::size_t> order = natural;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ra = static_cast<double>(dims[a]) / static_cast<double>(estimated_ranks[a]);
            const double rb = static_cast<double>(dims[b]) / static_cast<double>(estimated_ranks[b]);
            return ra > rb;
        });
        return order;
    }

    // Greedy flop minimization.
    std::vector<std::size_t> order;
    std::vector<bool> done(n, false);
    double j = 1.0;
    for (const std::size_t d : dims) j *= static_cast<double>(d);
    for (std::size_t step = 0; step < n; ++step) {
        std::size_t best = n;
        double best_cost = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            if (done[m]) continue;
            const double in = static_cast<double>(dims[m]);
            const double rn = static_cast<double>(estimated_ranks[m]);
            const double cost = 2.0 * j * in + (10.0 / 3.0) * in * in * in + 2.0 * j * rn;
            if (best == n || cost < best_cost) {
                best = m;
                best_cost = cost;
            }
        }
        done[best] = true;
        order.push_back(best);
        j = j * static_cast<double>(estimated_ranks[best]) / static_cast<double>(dims[best]);
    }
    return order;
}

namespace detail {

inline Matrix leading_columns(const Matrix& m, std::size_t count) {
    Matrix out(m.rows(), count);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) out(r, c) = m(r, c);
    return out;
}

/// Per-mode spectra of x feed rank estimates for the ordering heuristics.
inline std::vector<std::size_t> resolve_mode_order(const DenseTensor& x,
                                                   const DecomposeOptions& opts) {
    if (opts.order_strategy == ModeOrderStrategy::natural ||
        opts.order_strategy == ModeOrderStrategy::explicit_order)
        return order_modes(x.dims(), x.dims(), opts.order_strategy, opts.explicit_order);
    const double norm_sq = x.norm_sq();
    std::vector<std::size_t> est;
    for (std::size_t m = 0; m < x.order(); ++m) {
        const EigResult e = eig_sym(gram(x, m));
        est.push_back(choose_rank({e.eigenvalues.data(), e.eigenvalues.size()}, norm_sq,
                                  opts.epsilon, x.order()));
    }
    return order_modes(x.dims(), est, opts.order_strategy);
}

}  // namespace detail

/// Sequentially truncated higher-order SVD. Each mode in turn is compressed
/// by the leading eigenvectors of the running tensor's Gram matrix, with the
/// rank picked against this mode's share of the error budget; the running
/// tensor shrinks as factors are split off and ends as the core.
inline TuckerModel sthosvd(const DenseTensor& x, const DecomposeOptions& opts) {
    const std::size_t n = x.order();
    const double norm_sq = x.norm_sq();
    const std::vector<std::size_t> order = detail::resolve_mode_order(x, opts);

    TuckerModel model;
    model.factors.resize(n);
    model.original_norm = std::sqrt(norm_sq);
    DenseTensor y = x;
    for (const std::size_t mode : order) {
        const EigResult e = eig_sym(gram(y, mode));
        const std::size_t rank = choose_rank(
            {e.eigenvalues.data(), e.eigenvalues.size()}, norm_sq, opts.epsilon, n);
        model.factors[mode] = detail::leading_columns(e.vectors, rank);
        y = ttm(y, model.factors[mode], mode, /*transpose=*/true);
    }
    model.core = std::move(y);
    return model;
}

/// Alternating least squares refinement of an initial truncated HOSVD. Ranks
/// stay frozen at their initial values. The monitored misfit
/// norm(X)^2 - norm(core)^2 is recorded after initialization and after each
/// outer iteration (in fit_trace when given); iteration stops when its
/// decrease drops below hooi_rel_tol * norm(X)^2 or at max_hooi_iters.
inline TuckerModel hooi(const DenseTensor& x, const DecomposeOptions& opts,
                        std::vector<double>* fit_trace = nullptr) {
    TuckerModel model = sthosvd(x, opts);
    const std::size_t n = x.order();
    const double norm_sq = x.norm_sq();
    const std::vector<std::size_t> ranks = model.ranks();

    double fit = norm_sq - model.core.norm_sq();
    if (fit_trace != nullptr) fit_trace->push_back(fit);

    for (std::size_t iter = 0; iter < opts.max_hooi_iters; ++iter) {
        DenseTensor y;
        for (std::size_t mode = 0; mode < n; ++mode) {
            std::vector<TtmOp> ops;
            for (std::size_t m = 0; m < n; ++m)
                if (m != mode) ops.push_back({&model.factors[m], m, /*transpose=*/true});
            y = ttm_chain(x, ops);
            const EigResult e = eig_leading(gram(y, mode), ranks[mode]);
            model.factors[mode] = e.vectors;
        }
        // y already carries every product except mode N-1.
        model.core = ttm(y, model.factors[n - 1], n - 1, /*transpose=*/true);
        const double next_fit = norm_sq - model.core.norm_sq();
        if (fit_trace != nullptr) fit_trace->push_back(next_fit);
        if (fit - next_fit < opts.hooi_rel_tol * norm_sq) break;
        fit = next_fit;
    }
    return model;
}

/// Expands a model back to a dense tensor. Optional per-mode row subsets
/// restrict which original indices are produced, evaluating only that
/// sub-block of the reconstruction.
inline DenseTensor reconstruct(
    const TuckerModel& model,
    std::span<const std::optional<std::vector<std::size_t>>> row_subsets = {}) {
    const std::size_t n = model.factors.size();
    if (!row_subsets.empty() && row_subsets.size() != n)
        throw std::invalid_argument("row subset count does not match order");
    std::vector<Matrix> sliced(n);
    std::vector<TtmOp> ops;
    for (std::size_t m = 0; m < n; ++m) {
        const Matrix& u = model.factors[m];
        if (row_subsets.empty() || !row_subsets[m].has_value()) {
            ops.push_back({&u, m, false});
            continue;
        }
        const std::vector<std::size_t>& rows = *row_subsets[m];
        if (rows.empty()) throw std::invalid_argument("empty row subset");
        Matrix sub(rows.size(), u.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r] >= u.rows()) throw std::out_of_range("row subset out of range");
            for (std::size_t c = 0; c < u.cols(); ++c) sub(r, c) = u(rows[r], c);
        }
        sliced[m] = std::move(sub);
        ops.push_back({&sliced[m], m, false});
    }
    return ttm_chain(model.core, ops);
}

/// Squared residual norm(X)^2 - norm(core)^2, valid because the core is the
/// projection of X onto the factors' column spaces.
inline double fit_error_sq(const TuckerModel& model) {
    return model.original_norm * model.original_norm - model.core.norm_sq();
}

}  // namespace tuckit
