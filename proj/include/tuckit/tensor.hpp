#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tuckit/memory.hpp"

namespace tuckit {

/// Position of a tensor entry inside a mode-n unfolding.
struct MatrixCoord {
    std::size_t row = 0;
    std::size_t col = 0;
};

namespace detail {

inline std::size_t product(std::span<const std::size_t> dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           std::multiplies<>());
}

inline std::size_t product_before(std::span<const std::size_t> dims, std::size_t mode) {
    std::size_t p = 1;
    for (std::size_t m = 0; m < mode; ++m) p *= dims[m];
    return p;
}

inline std::size_t product_after(std::span<const std::size_t> dims, std::size_t mode) {
    std::size_t p = 1;
    for (std::size_t m = mode + 1; m < dims.size(); ++m) p *= dims[m];
    return p;
}

inline void check_mode(std::span<const std::size_t> dims, std::size_t mode) {
    if (mode >= dims.size())
        throw std::invalid_argument("mode " + std::to_string(mode) +
                                    " out of range for order " +
                                    std::to_string(dims.size()));
}

}  // namespace detail

/// Maps a multi-index to its (row, col) position in the mode-n unfolding.
/// The row is the mode-n index; the column linearizes the remaining indices
/// with the first remaining mode varying fastest. Modes and indices are
/// zero-based.
inline MatrixCoord unfold_map(std::span<const std::size_t> dims, std::size_t mode,
                              std::span<const std::size_t> idx) {
    detail::check_mode(dims, mode);
    if (idx.size() != dims.size())
        throw std::invalid_argument("index order does not match tensor order");
    std::size_t col = 0;
    std::size_t stride = 1;
    for (std::size_t m = 0; m < dims.size(); ++m) {
        if (idx[m] >= dims[m]) throw std::out_of_range("tensor index out of bounds");
        if (m == mode) continue;
        col += idx[m] * stride;
        stride *= dims[m];
    }
    return {idx[mode], col};
}

/// Dense N-way tensor. Entries are linearized with the first mode varying
/// fastest, which makes the flat buffer the mode-1 unfolding in column-major
/// order. For mode n the buffer decomposes into product(dims[m], m > n)
/// contiguous blocks, each holding an I_n x product(dims[m], m < n) slice of
/// the mode-n unfolding in row-major order; the compute kernels walk these
/// blocks instead of materializing unfoldings.
class DenseTensor {
public:
    DenseTensor() = default;

    explicit DenseTensor(std::vector<std::size_t> dims)
        : dims_(std::move(dims)), values_(checked_size(dims_), 0.0) {}

    DenseTensor(std::vector<std::size_t> dims, DVec values)
        : dims_(std::move(dims)), values_(std::move(values)) {
        if (values_.size() != checked_size(dims_))
            throw std::invalid_argument("value count does not match dimensions");
    }

    DenseTensor(std::vector<std::size_t> dims, std::span<const double> values)
        : dims_(std::move(dims)), values_(values.begin(), values.end()) {
        if (values_.size() != checked_size(dims_))
            throw std::invalid_argument("value count does not match dimensions");
    }

    [[nodiscard]] std::size_t order() const { return dims_.size(); }
    [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
    [[nodiscard]] std::size_t dim(std::size_t mode) const { return dims_.at(mode); }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    [[nodiscard]] const double* data() const { return values_.data(); }
    [[nodiscard]] double* data() { return values_.data(); }
    [[nodiscard]] const DVec& values() const { return values_; }
    [[nodiscard]] DVec& values() { return values_; }

    [[nodiscard]] std::size_t linear_index(std::span<const std::size_t> idx) const {
        if (idx.size() != dims_.size())
            throw std::invalid_argument("index order does not match tensor order");
        std::size_t lin = 0;
        std::size_t stride = 1;
        for (std::size_t m = 0; m < dims_.size(); ++m) {
            if (idx[m] >= dims_[m]) throw std::out_of_range("tensor index out of bounds");
            lin += idx[m] * stride;
            stride *= dims_[m];
        }
        return lin;
    }

    [[nodiscard]] double at(std::span<const std::size_t> idx) const {
        return values_[linear_index(idx)];
    }
    [[nodiscard]] double& at(std::span<const std::size_t> idx) {
        return values_[linear_index(idx)];
    }

    [[nodiscard]] double norm_sq() const {
        double s = 0.0;
        for (const double v : values_) s += v * v;
        return s;
    }

    [[nodiscard]] double norm() const { return std::sqrt(norm_sq()); }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& dims) {
        if (dims.empty()) throw std::invalid_argument("tensor order must be at least 1");
        for (const std::size_t d : dims)
            if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
        return detail::product(dims);
    }

    std::vector<std::size_t> dims_;
    DVec values_;
};

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::span<const double> values)
        : rows_(rows), cols_(cols), values_(values.begin(), values.end()) {
        if (values_.size() != rows * cols)
            throw std::invalid_argument("value count does not match matrix shape");
    }

    Matrix(std::size_t rows, std::size_t cols, DVec values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows * cols)
            throw std::invalid_argument("value count does not match matrix shape");
    }

    [[nodiscard]] static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    [[nodiscard]] double operator()(std::size_t r, std::size_t c) const {
        return values_[r * cols_ + c];
    }
    [[nodiscard]] double& operator()(std::size_t r, std::size_t c) {
        return values_[r * cols_ + c];
    }

    [[nodiscard]] const double* data() const { return values_.data(); }
    [[nodiscard]] double* data() { return values_.data(); }
    [[nodiscard]] const double* row(std::size_t r) const { return values_.data() + r * cols_; }
    [[nodiscard]] double* row(std::size_t r) { return values_.data() + r * cols_; }
    [[nodiscard]] const DVec& values() const { return values_; }

    [[nodiscard]] Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    DVec values_;
};

/// Copies the slab of X with mode-n index in [lo, lo + len).
inline DenseTensor slice_mode(const DenseTensor& x, std::size_t mode, std::size_t lo,
                              std::size_t len) {
    detail::check_mode(x.dims(), mode);
    const std::size_t in = x.dim(mode);
    if (lo + len > in || len == 0)
        throw std::invalid_argument("slice range out of bounds");
    std::vector<std::size_t> out_dims = x.dims();
    out_dims[mode] = len;
    DenseTensor out(std::move(out_dims));
    const std::size_t pre = detail::product_before(x.dims(), mode);
    const std::size_t post = detail::product_after(x.dims(), mode);
    const double* src = x.data();
    double* dst = out.data();
    for (std::size_t b = 0; b < post; ++b) {
        const double* sblk = src + (b * in + lo) * pre;
        double* dblk = dst + b * len * pre;
        for (std::size_t k = 0; k < len * pre; ++k) dblk[k] = sblk[k];
    }
    return out;
}

}  // namespace tuckit
