#pragma once

/// Block distribution of dense tensors and factor matrices over a process
/// grid. A tensor is split into one contiguous subtensor per rank by the
/// Cartesian block map: along each mode, index range [lo, lo + len) with
/// lo = p * floor(J/P) + min(p, J mod P) and len = floor(J/P) + (p < J mod P),
/// so the first (J mod P) parts are one longer. Factor matrices are stored
/// transposed (K x J_n) and split into block columns along their tensor
/// mode, each block owned redundantly by every rank sharing that mode's
/// grid coordinate.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuckit/grid.hpp"
#include "tuckit/sim.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

/// Contiguous index range [lo, lo + len) of one block.
struct BlockRange {
    std::size_t lo = 0;
    std::size_t len = 0;
};

/// The block map: part `part` of `extent` indices split `parts` ways.
inline BlockRange block_range(std::size_t extent, std::size_t parts, std::size_t part) {
    if (parts == 0) throw std::invalid_argument("block map needs at least one part");
    if (part >= parts) throw std::invalid_argument("block part index out of range");
    const std::size_t base = extent / parts;
    const std::size_t rem = extent % parts;
    return {part * base + std::min(part, rem), base + (part < rem ? 1 : 0)};
}

/// Block-distributed dense tensor: global shape plus this rank's block.
struct DistTensor {
    std::vector<std::size_t> global_dims;
    DenseTensor local;

    [[nodiscard]] std::size_t order() const { return global_dims.size(); }
};

/// Block column of a transposed factor matrix V (global shape K x J_n, J_n
/// being the extent of tensor mode `mode`). This rank's block holds all K
/// rows of its mode-`mode` column range, row-major; every rank sharing the
/// mode-`mode` grid coordinate holds a bit-identical copy.
struct DistFactorMatrix {
    std::size_t mode = 0;
    std::size_t global_rows = 0;
    std::size_t global_cols = 0;
    Matrix local;
};

namespace detail {

/// Per-mode index ranges owned by `rank` for a tensor of the given shape.
inline std::vector<BlockRange> block_ranges_for(std::span<const std::size_t> global_dims,
                                                const ProcessGrid& grid, std::size_t rank) {
    if (grid.order() != global_dims.size())
        throw std::invalid_argument("grid order does not match tensor order");
    const std::vector<std::size_t> coords = grid.coords_of(rank);
    std::vector<BlockRange> ranges(global_dims.size());
    for (std::size_t m = 0; m < global_dims.size(); ++m) {
        if (grid.dim(m) > global_dims[m])
            throw std::invalid_argument("more grid parts than indices along a mode");
        ranges[m] = block_range(global_dims[m], grid.dim(m), coords[m]);
    }
    return ranges;
}

/// Copies one rank's block between a global buffer (column-major over
/// global_dims) and a local buffer (column-major over the block lengths).
/// Rows along mode 0 are contiguous in both layouts.
template <typename Body>
void for_each_block_row(std::span<const std::size_t> global_dims,
                        std::span<const BlockRange> ranges, const Body& body) {
    const std::size_t order = global_dims.size();
    std::vector<std::size_t> strides(order);
    std::size_t stride = 1;
    for (std::size_t m = 0; m < order; ++m) {
        strides[m] = stride;
        stride *= global_dims[m];
    }
    std::size_t local_rows = 1;
    for (std::size_t m = 1; m < order; ++m) local_rows *= ranges[m].len;

    std::vector<std::size_t> index(order, 0);  // local index; mode 0 stays 0
    for (std::size_t row = 0; row < local_rows; ++row) {
        std::size_t global_offset = ranges[0].lo * strides[0];
        for (std::size_t m = 1; m < order; ++m) {
            global_offset += (ranges[m].lo + index[m]) * strides[m];
        }
        body(row * ranges[0].len, global_offset, ranges[0].len);
        for (std::size_t m = 1; m < order; ++m) {
            if (++index[m] < ranges[m].len) break;
            index[m] = 0;
        }
    }
}

}  // namespace detail

/// Splits a globally known tensor into this rank's block. This is the data
/// loading seam — each rank carves its own block out of the input, so no
/// messages move; gather() is the communicating inverse.
inline DistTensor distribute(RankContext& ctx, const DenseTensor& x) {
    const std::vector<BlockRange> ranges =
        detail::block_ranges_for(x.dims(), ctx.grid(), ctx.rank());
    std::vector<std::size_t> local_dims(ranges.size());
    for (std::size_t m = 0; m < ranges.size(); ++m) local_dims[m] = ranges[m].len;
    DenseTensor local(std::move(local_dims));
    detail::for_each_block_row(
        x.dims(), ranges, [&](std::size_t local_off, std::size_t global_off, std::size_t len) {
            std::memcpy(local.data() + local_off, x.data() + global_off,
                        len * sizeof(double));
        });
    return {x.dims(), std::move(local)};
}

/// Splits a globally known K x J_n matrix into this rank's block column for
/// tensor mode `mode`. Like distribute(), a local carve-out with no
/// communication; ranks sharing the mode-`mode` coordinate produce
/// identical blocks because they copy the same columns.
inline DistFactorMatrix distribute_factor(RankContext& ctx, const Matrix& v,
                                          std::size_t mode) {
    const ProcessGrid& grid = ctx.grid();
    if (mode >= grid.order()) throw std::invalid_argument("factor mode out of range");
    if (grid.dim(mode) > v.cols())
        throw std::invalid_argument("more grid parts than matrix columns");
    const std::size_t part = grid.coords_of(ctx.rank())[mode];
    const BlockRange range = block_range(v.cols(), grid.dim(mode), part);
    Matrix local(v.rows(), range.len);
    for (std::size_t r = 0; r < v.rows(); ++r)
        for (std::size_t j = 0; j < range.len; ++j) local(r, j) = v(r, range.lo + j);
    return {mode, v.rows(), v.cols(), std::move(local)};
}

/// Rebuilds the full tensor from the distributed blocks, replicated on every
/// rank (all-gather over all ranks in ascending rank order, then block
/// placement). gather(distribute(X)) reproduces X bit for bit.
inline DenseTensor gather(RankContext& ctx, const DistTensor& t) {
    const ProcessGrid& grid = ctx.grid();
    const DVec flat = ctx.all_gather(grid.all_ranks(), t.local.values());
    DenseTensor out(t.global_dims);
    std::size_t offset = 0;
    for (std::size_t r = 0; r < grid.size(); ++r) {
        const std::vector<BlockRange> ranges =
            detail::block_ranges_for(t.global_dims, grid, r);
        std::size_t block_size = 1;
        for (const BlockRange& range : ranges) block_size *= range.len;
        detail::for_each_block_row(
            t.global_dims, ranges,
            [&](std::size_t local_off, std::size_t global_off, std::size_t len) {
                std::memcpy(out.data() + global_off, flat.data() + offset + local_off,
                            len * sizeof(double));
            });
        offset += block_size;
    }
    return out;
}

/// Rebuilds the global K x J_n matrix from the block columns held along this
/// rank's mode-`mode` processor column, replicated on every rank.
inline Matrix gather_factor(RankContext& ctx, const DistFactorMatrix& f) {
    const FiberGroup column = ctx.grid().proc_column(ctx.rank(), f.mode);
    const DVec flat = ctx.all_gather(column, f.local.values());
    Matrix out(f.global_rows, f.global_cols);
    std::size_t offset = 0;
    for (std::size_t part = 0; part < column.size(); ++part) {
        const BlockRange range = block_range(f.global_cols, column.size(), part);
        for (std::size_t r = 0; r < f.global_rows; ++r) {
            for (std::size_t j = 0; j < range.len; ++j) {
                out(r, range.lo + j) = flat[offset + r * range.len + j];
            }
        }
        offset += f.global_rows * range.len;
    }
    return out;
}

}  // namespace tuckit
