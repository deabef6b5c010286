#pragma once

/// Distributed Tucker drivers built on the parallel kernels. They mirror the
/// sequential drivers step for step — same mode ordering, same rank rule,
/// same stopping rule — so a run on a single-rank grid reproduces the
/// sequential result bit for bit, and runs on different grids agree up to
/// roundoff of the reassociated sums.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuckit/decompose.hpp"
#include "tuckit/dist_tensor.hpp"
#include "tuckit/par_kernels.hpp"
#include "tuckit/sim.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

/// Distributed truncated Tucker representation: block-distributed core plus
/// one transposed factor block column per mode.
struct DistTuckerModel {
    DistTensor core;
    std::vector<DistFactorMatrix> factors;
    double original_norm = 0.0;

    [[nodiscard]] std::vector<std::size_t> ranks() const {
        std::vector<std::size_t> r;
        for (const DistFactorMatrix& f : factors) r.push_back(f.global_rows);
        return r;
    }

    [[nodiscard]] std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d;
        for (const DistFactorMatrix& f : factors) d.push_back(f.global_cols);
        return d;
    }
};

/// Exact squared norm of a distributed tensor: local squared norms summed
/// over all ranks in ascending rank order.
inline double dist_norm_sq(RankContext& ctx, const DistTensor& t) {
    const DVec local{t.local.norm_sq()};
    return ctx.all_reduce(ctx.grid().all_ranks(), local).at(0);
}

namespace detail {

/// Distributed twin of resolve_mode_order: the heuristic strategies estimate
/// per-mode ranks from the distributed Gram spectra of the input.
inline std::vector<std::size_t> par_resolve_mode_order(RankContext& ctx, const DistTensor& x,
                                                       const DecomposeOptions& opts,
                                                       double norm_sq) {
    if (opts.order_strategy == ModeOrderStrategy::natural ||
        opts.order_strategy == ModeOrderStrategy::explicit_order)
        return order_modes(x.global_dims, x.global_dims, opts.order_strategy,
                           opts.explicit_order);
    std::vector<std::size_t> est;
    for (std::size_t m = 0; m < x.order(); ++m) {
        const DistFactorMatrix s = par_gram(ctx, x, m);
        const ParEig e = par_eigenvectors(ctx, s, [&](std::span<const double> spectrum) {
            return choose_rank(spectrum, norm_sq, opts.epsilon, x.order());
        });
        est.push_back(e.rank);
    }
    return order_modes(x.global_dims, est, opts.order_strategy);
}

}  // namespace detail

/// Distributed sequentially truncated HOSVD. The running tensor is consumed
/// so at most one full-size distributed copy is live per rank; each mode in
/// turn contributes a Gram, a redundant eigensolve with the shared error-
/// budget rank rule, and a distributed product that shrinks the tensor.
inline DistTuckerModel par_sthosvd(RankContext& ctx, DistTensor&& x,
                                   const DecomposeOptions& opts) {
    const std::size_t n = x.order();
    if (n == 0) throw std::invalid_argument("tensor order must be positive");
    const double norm_sq = dist_norm_sq(ctx, x);
    const std::vector<std::size_t> order =
        detail::par_resolve_mode_order(ctx, x, opts, norm_sq);

    DistTuckerModel model;
    model.factors.resize(n);
    model.original_norm = std::sqrt(norm_sq);
    DistTensor y = std::move(x);
    for (const std::size_t mode : order) {
        {
            const DistFactorMatrix s = par_gram(ctx, y, mode);
            ParEig e = par_eigenvectors(ctx, s, [&](std::span<const double> spectrum) {
                return choose_rank(spectrum, norm_sq, opts.epsilon, n);
            });
            model.factors[mode] = std::move(e.factor);
        }
        y = par_ttm(ctx, y, model.factors[mode]);
    }
    model.core = std::move(y);
    return model;
}

/// Distributed alternating refinement of a distributed truncated HOSVD,
/// ranks frozen at their initial values. Each sweep recomputes, per mode,
/// the product of the input with every other factor, then replaces that
/// mode's factor by the leading eigenvectors; the final sweep's product
/// already carries all but the last factor, so the core needs only one more
/// product. The monitored misfit norm(X)^2 - norm(core)^2 is appended to
/// fit_trace (when given) after initialization and after each sweep;
/// iteration stops when its decrease drops below hooi_rel_tol * norm(X)^2
/// or at max_hooi_iters.
inline DistTuckerModel par_hooi(RankContext& ctx, const DistTensor& x,
                                const DecomposeOptions& opts,
                                std::vector<double>* fit_trace = nullptr) {
    DistTuckerModel model = par_sthosvd(ctx, DistTensor(x), opts);
    const std::size_t n = x.order();
    const double norm_sq = dist_norm_sq(ctx, x);
    const std::vector<std::size_t> ranks = model.ranks();

    double fit = norm_sq - dist_norm_sq(ctx, model.core);
    if (fit_trace != nullptr) fit_trace->push_back(fit);

    for (std::size_t iter = 0; iter < opts.max_hooi_iters; ++iter) {
        DistTensor y;
        for (std::size_t mode = 0; mode < n; ++mode) {
            y = x;
            for (std::size_t m = 0; m < n; ++m) {
                if (m != mode) y = par_ttm(ctx, y, model.factors[m]);
            }
            const DistFactorMatrix s = par_gram(ctx, y, mode);
            model.factors[mode] = par_eigenvectors(ctx, s, ranks[mode]);
        }
        // y already carries every product except mode N-1.
        model.core = par_ttm(ctx, y, model.factors[n - 1]);
        const double next_fit = norm_sq - dist_norm_sq(ctx, model.core);
        if (fit_trace != nullptr) fit_trace->push_back(next_fit);
        if (fit - next_fit < opts.hooi_rel_tol * norm_sq) break;
        fit = next_fit;
    }
    return model;
}

/// Gathers a distributed model into the sequential representation,
/// replicated on every rank: factors return to their I_n x R_n orientation
/// and the core becomes a plain dense tensor.
inline TuckerModel to_sequential(RankContext& ctx, const DistTuckerModel& model) {
    TuckerModel out;
    out.core = gather(ctx, model.core);
    out.original_norm = model.original_norm;
    out.factors.reserve(model.factors.size());
    for (const DistFactorMatrix& f : model.factors) {
        const Matrix v = gather_factor(ctx, f);
        Matrix u(v.cols(), v.rows());
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) u(c, r) = v(r, c);
        out.factors.push_back(std::move(u));
    }
    return out;
}

}  // namespace tuckit
