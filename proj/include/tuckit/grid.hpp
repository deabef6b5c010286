#pragma once

/// Logical N-way Cartesian process grid: a bijection between flat rank ids
/// and grid coordinates, plus the fiber groups (processor columns and rows)
/// that the distributed kernels communicate over.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace tuckit {

/// Ordered set of ranks forming one communication group. Members are always
/// listed in ascending rank id, which for a processor column coincides with
/// ascending coordinate along the free mode; collectives use this order as
/// their fixed reduction order.
struct FiberGroup {
    std::vector<std::size_t> members;

    [[nodiscard]] std::size_t size() const { return members.size(); }

    /// Position of `rank` within the group.
    [[nodiscard]] std::size_t member_index_of(std::size_t rank) const {
        const auto it = std::lower_bound(members.begin(), members.end(), rank);
        if (it == members.end() || *it != rank) {
            throw std::invalid_argument("rank is not a member of this group");
        }
        return static_cast<std::size_t>(it - members.begin());
    }
};

/// N-way process grid of extents P_1 x ... x P_N. Ranks map to coordinates
/// column-major: the first coordinate varies fastest, matching the tensor
/// element order, so rank 0 sits at the all-zeros coordinate.
class ProcessGrid {
public:
    explicit ProcessGrid(std::vector<std::size_t> pdims) : pdims_(std::move(pdims)) {
        if (pdims_.empty()) throw std::invalid_argument("process grid needs at least one mode");
        size_ = 1;
        for (const std::size_t p : pdims_) {
            if (p == 0) throw std::invalid_argument("process grid extents must be positive");
            size_ *= p;
        }
    }

    [[nodiscard]] std::size_t order() const { return pdims_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& dims() const { return pdims_; }
    [[nodiscard]] std::size_t dim(std::size_t mode) const { return pdims_.at(mode); }
    [[nodiscard]] std::size_t size() const { return size_; }

    [[nodiscard]] std::size_t rank_of(std::span<const std::size_t> coords) const {
        if (coords.size() != pdims_.size()) {
            throw std::invalid_argument("coordinate order does not match grid order");
        }
        std::size_t rank = 0;
        std::size_t stride = 1;
        for (std::size_t m = 0; m < pdims_.size(); ++m) {
            if (coords[m] >= pdims_[m]) throw std::out_of_range("grid coordinate out of range");
            rank += coords[m] * stride;
            stride *= pdims_[m];
        }
        return rank;
    }

    [[nodiscard]] std::vector<std::size_t> coords_of(std::size_t rank) const {
        check_rank(rank);
        std::vector<std::size_t> coords(pdims_.size());
        for (std::size_t m = 0; m < pdims_.size(); ++m) {
            coords[m] = rank % pdims_[m];
            rank /= pdims_[m];
        }
        return coords;
    }

    /// Ranks that share every coordinate of `rank` except along `mode`:
    /// the processor column of that mode, with dim(mode) members ordered by
    /// their coordinate along `mode`.
    [[nodiscard]] FiberGroup proc_column(std::size_t rank, std::size_t mode) const {
        check_mode(mode);
        std::vector<std::size_t> coords = coords_of(rank);
        FiberGroup group;
        group.members.reserve(pdims_[mode]);
        for (std::size_t p = 0; p < pdims_[mode]; ++p) {
            coords[mode] = p;
            group.members.push_back(rank_of(coords));
        }
        return group;
    }

    /// Ranks that share the coordinate of `rank` along `mode` and range over
    /// every other mode: the processor row, with size()/dim(mode) members in
    /// ascending rank order.
    [[nodiscard]] FiberGroup proc_row(std::size_t rank, std::size_t mode) const {
        check_mode(mode);
        const std::size_t fixed = coords_of(rank)[mode];
        FiberGroup group;
        group.members.reserve(size_ / pdims_[mode]);
        for (std::size_t r = 0; r < size_; ++r) {
            if (coords_of(r)[mode] == fixed) group.members.push_back(r);
        }
        return group;
    }

    /// Every rank in the grid, ascending.
    [[nodiscard]] FiberGroup all_ranks() const {
        FiberGroup group;
        group.members.resize(size_);
        for (std::size_t r = 0; r < size_; ++r) group.members[r] = r;
        return group;
    }

private:
    void check_rank(std::size_t rank) const {
        if (rank >= size_) throw std::out_of_range("rank out of range");
    }
    void check_mode(std::size_t mode) const {
        if (mode >= pdims_.size()) throw std::invalid_argument("grid mode out of range");
    }

    std::vector<std::size_t> pdims_;
    std::size_t size_ = 1;
};

}  // namespace tuckit
