#pragma once

/// Distributed mode-n kernels over block-distributed tensors: tensor-times-
/// matrix, Gram, and the redundant eigenvector step. Every collective runs
/// over either the mode-n processor column (the ranks whose coordinates
/// differ only in mode n) or the processor row (the ranks sharing the mode-n
/// coordinate), and all summations happen in a fixed member order, so the
/// results are independent of execution interleaving.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuckit/dist_tensor.hpp"
#include "tuckit/eig.hpp"
#include "tuckit/grid.hpp"
#include "tuckit/kernels.hpp"
#include "tuckit/sim.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

/// Distributed mode-n product Z = Y x_n V for a transposed-layout factor
/// V (global K x J_n, block columns along mode v.mode). Each rank multiplies
/// its tensor block against its factor block one output part at a time and
/// the partial products are summed over the mode-n processor column, rooted
/// at the part's owner. When the output extent is small (K < J_n / P_n) the
/// partials are formed in one multiply and summed in one all-reduce instead,
/// with identical results. The result tensor has mode-n extent K, block-
/// distributed by the same map.
inline DistTensor par_ttm(RankContext& ctx, const DistTensor& y, const DistFactorMatrix& v) {
    const std::size_t mode = v.mode;
    if (mode >= y.order()) throw std::invalid_argument("factor mode out of range");
    if (v.global_cols != y.global_dims[mode])
        throw std::invalid_argument("factor shape does not match tensor mode extent");
    const ProcessGrid& grid = ctx.grid();
    const std::size_t parts = grid.dim(mode);
    const std::size_t k = v.global_rows;
    if (k < parts)
        throw std::invalid_argument("output mode extent smaller than the grid mode");

    const FiberGroup column = grid.proc_column(ctx.rank(), mode);
    const std::size_t my_part = column.member_index_of(ctx.rank());
    const BlockRange mine = block_range(k, parts, my_part);

    std::vector<std::size_t> out_global = y.global_dims;
    out_global[mode] = k;

    if (k * parts < y.global_dims[mode]) {
        // Single multiply, single summation, local slice.
        DVec summed;
        std::vector<std::size_t> full_dims;
        {
            const DenseTensor w = detail::ttm_rows(y.local, v.local, mode, false, 0, k);
            full_dims = w.dims();
            summed = ctx.all_reduce(column, w.values());
        }
        const DenseTensor full(std::move(full_dims), std::move(summed));
        return {std::move(out_global), slice_mode(full, mode, mine.lo, mine.len)};
    }

    // One partial product and one reduction per output part.
    DenseTensor result;
    for (std::size_t part = 0; part < parts; ++part) {
        const BlockRange range = block_range(k, parts, part);
        DenseTensor w = detail::ttm_rows(y.local, v.local, mode, false, range.lo, range.len);
        DVec reduced = ctx.reduce(column, w.values(), part);
        if (part == my_part) {
            std::vector<std::size_t> dims = w.dims();
            result = DenseTensor(std::move(dims), std::move(reduced));
        }
    }
    return {std::move(out_global), std::move(result)};
}

/// Distributed Gram matrix S = Y_(n) Y_(n)^T of a block-distributed tensor,
/// returned as this rank's block column of S (global J_n x J_n), replicated
/// across the ranks sharing the mode-n coordinate.
///
/// Ring exchange over the processor column: at step i this rank sends its
/// block to the member p - i places back and receives the block of the
/// member p + i places ahead (mod P_n), multiplying each arrival against its
/// own block. The partial block row this builds covers only this rank's
/// share of the fibers; one all-reduce across the processor row completes
/// it, and a local transpose yields the block column.
inline DistFactorMatrix par_gram(RankContext& ctx, const DistTensor& y, std::size_t mode) {
    if (mode >= y.order()) throw std::invalid_argument("gram mode out of range");
    const ProcessGrid& grid = ctx.grid();
    const FiberGroup column = grid.proc_column(ctx.rank(), mode);
    const std::size_t parts = column.size();
    const std::size_t p = column.member_index_of(ctx.rank());
    const std::size_t jn = y.global_dims[mode];
    const BlockRange mine = block_range(jn, parts, p);

    Matrix row_block(mine.len, jn);
    const auto paste = [&](const Matrix& block, const BlockRange& cols) {
        for (std::size_t r = 0; r < block.rows(); ++r)
            for (std::size_t j = 0; j < block.cols(); ++j)
                row_block(r, cols.lo + j) = block(r, j);
    };
    paste(gram(y.local, mode), mine);
    for (std::size_t i = 1; i < parts; ++i) {
        const std::size_t to = (p + parts - i) % parts;
        const std::size_t from = (p + i) % parts;
        ctx.send(column.members[to], y.local.values());
        DVec received = ctx.recv(column.members[from]);
        const BlockRange theirs = block_range(jn, parts, from);
        std::vector<std::size_t> their_dims = y.local.dims();
        their_dims[mode] = theirs.len;
        const DenseTensor w(std::move(their_dims), std::move(received));
        paste(gram_cross(y.local, w, mode), theirs);
    }

    const DVec summed = ctx.all_reduce(grid.proc_row(ctx.rank(), mode), row_block.values());
    Matrix col_block(jn, mine.len);
    for (std::size_t r = 0; r < mine.len; ++r)
        for (std::size_t j = 0; j < jn; ++j) col_block(j, r) = summed[r * jn + j];
    return {mode, jn, jn, std::move(col_block)};
}

/// Result of the distributed eigenvector step: the kept factor block, the
/// full spectrum (identical on every rank), and the kept column count.
struct ParEig {
    DistFactorMatrix factor;
    DVec eigenvalues;
    std::size_t rank = 0;
};

/// All-gathers the Gram block columns over the mode-n processor column,
/// eigendecomposes the assembled matrix redundantly (bit-identically) on
/// every rank, lets `choose` pick how many leading eigenvectors to keep from
/// the spectrum, and extracts this rank's block of the transposed factor.
template <typename Chooser>
    requires std::invocable<const Chooser&, std::span<const double>>
ParEig par_eigenvectors(RankContext& ctx, const DistFactorMatrix& s, const Chooser& choose) {
    if (s.global_rows != s.global_cols)
        throw std::invalid_argument("gram block column must come from a square matrix");
    const std::size_t mode = s.mode;
    const std::size_t jn = s.global_cols;
    const FiberGroup column = ctx.grid().proc_column(ctx.rank(), mode);
    const std::size_t parts = column.size();
    const std::size_t p = column.member_index_of(ctx.rank());

    Matrix full(jn, jn);
    {
        const DVec flat = ctx.all_gather(column, s.local.values());
        std::size_t offset = 0;
        for (std::size_t part = 0; part < parts; ++part) {
            const BlockRange range = block_range(jn, parts, part);
            for (std::size_t r = 0; r < jn; ++r)
                for (std::size_t j = 0; j < range.len; ++j)
                    full(r, range.lo + j) = flat[offset + r * range.len + j];
            offset += jn * range.len;
        }
    }
    EigResult e = eig_sym(std::move(full));

    const std::size_t kept =
        static_cast<std::size_t>(choose(std::span<const double>{e.eigenvalues.data(),
                                                                e.eigenvalues.size()}));
    if (kept == 0 || kept > jn)
        throw std::invalid_argument("chosen eigenvector count out of range");

    const BlockRange mine = block_range(jn, parts, p);
    Matrix block(kept, mine.len);
    for (std::size_t r = 0; r < kept; ++r)
        for (std::size_t j = 0; j < mine.len; ++j) block(r, j) = e.vectors(mine.lo + j, r);

    ParEig out;
    out.factor = {mode, kept, jn, std::move(block)};
    out.eigenvalues = std::move(e.eigenvalues);
    out.rank = kept;
    return out;
}

/// Fixed-count variant: keep exactly `kept` leading eigenvectors.
inline DistFactorMatrix par_eigenvectors(RankContext& ctx, const DistFactorMatrix& s,
                                         std::size_t kept) {
    return par_eigenvectors(ctx, s, [kept](std::span<const double>) { return kept; }).factor;
}

}  // namespace tuckit
