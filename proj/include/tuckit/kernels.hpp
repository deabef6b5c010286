#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "tuckit/tensor.hpp"

namespace tuckit {

namespace detail {

/// Multiplies the mode-n unfolding of x by the row range [row_lo, row_lo + k)
/// of V (or of V^T when transpose is set), writing the result tensor whose
/// mode-n extent is k. Walks the block layout of the flat buffer; the
/// unfolding is never formed. For each output entry the contraction index
/// ascends, so results do not depend on how rows of V are split into ranges.
inline DenseTensor ttm_rows(const DenseTensor& x, const Matrix& v, std::size_t mode,
                            bool transpose, std::size_t row_lo, std::size_t k) {
    const std::size_t in = x.dim(mode);
    const std::size_t contraction = transpose ? v.rows() : v.cols();
    if (contraction != in)
        throw std::invalid_argument("matrix shape does not match tensor mode extent");
    std::vector<std::size_t> out_dims = x.dims();
    out_dims[mode] = k;
    DenseTensor out(std::move(out_dims));
    const std::size_t pre = product_before(x.dims(), mode);
    const std::size_t post = product_after(x.dims(), mode);
    const double* src = x.data();
    double* dst = out.data();
    for (std::size_t b = 0; b < post; ++b) {
        const double* xblk = src + b * in * pre;
        double* yblk = dst + b * k * pre;
        for (std::size_t kk = 0; kk < k; ++kk) {
            double* yrow = yblk + kk * pre;
            for (std::size_t r = 0; r < in; ++r) {
                const double w =
                    transpose ? v(r, row_lo + kk) : v(row_lo + kk, r);
                const double* xrow = xblk + r * pre;
                for (std::size_t c = 0; c < pre; ++c) yrow[c] += w * xrow[c];
            }
        }
    }
    return out;
}

}  // namespace detail

/// Mode-n tensor-times-matrix product Y = X x_n V, defined by
/// Y_(n) = V * X_(n). With transpose set, V^T is applied instead and V must
/// have I_n rows rather than I_n columns.
inline DenseTensor ttm(const DenseTensor& x, const Matrix& v, std::size_t mode,
                       bool transpose = false) {
    detail::check_mode(x.dims(), mode);
    const std::size_t k = transpose ? v.cols() : v.rows();
    if (k == 0) throw std::invalid_argument("matrix must have at least one output row");
    return detail::ttm_rows(x, v, mode, transpose, 0, k);
}

/// One factor of a multi-mode product.
struct TtmOp {
    const Matrix* mat = nullptr;
    std::size_t mode = 0;
    bool transpose = false;
};

/// Applies a sequence of mode products. Each listed mode must be distinct.
/// The optional order permutes which mode is applied first; the result is
/// independent of that choice up to roundoff.
inline DenseTensor ttm_chain(const DenseTensor& x, std::span<const TtmOp> ops,
                             std::span<const std::size_t> order = {}) {
    std::vector<std::size_t> seq;
    if (order.empty()) {
        for (std::size_t i = 0; i < ops.size(); ++i) seq.push_back(i);
    } else {
        if (order.size() != ops.size())
            throw std::invalid_argument("order length does not match op count");
        for (const std::size_t mode : order) {
            std::size_t found = ops.size();
            for (std::size_t i = 0; i < ops.size(); ++i)
                if (ops[i].mode == mode) found = i;
            if (found == ops.size())
                throw std::invalid_argument("order names a mode with no op");
            seq.push_back(found);
        }
    }
    std::vector<bool> seen(x.order(), false);
    for (const TtmOp& op : ops) {
        detail::check_mode(x.dims(), op.mode);
        if (op.mat == nullptr) throw std::invalid_argument("null matrix in ttm chain");
        if (seen[op.mode]) throw std::invalid_argument("duplicate mode in ttm chain");
        seen[op.mode] = true;
    }
    if (ops.empty()) return x;
    DenseTensor cur = ttm(x, *ops[seq[0]].mat, ops[seq[0]].mode, ops[seq[0]].transpose);
    for (std::size_t i = 1; i < seq.size(); ++i) {
        const TtmOp& op = ops[seq[i]];
        cur = ttm(cur, *op.mat, op.mode, op.transpose);
    }
    return cur;
}

/// Gram matrix of the mode-n unfolding, S = X_(n) * X_(n)^T. The upper
/// triangle is accumulated over the layout blocks in ascending global column
/// order and mirrored, so S is exactly symmetric.
inline Matrix gram(const DenseTensor& x, std::size_t mode) {
    detail::check_mode(x.dims(), mode);
    const std::size_t in = x.dim(mode);
    const std::size_t pre = detail::product_before(x.dims(), mode);
    const std::size_t post = detail::product_after(x.dims(), mode);
    Matrix s(in, in);
    const double* src = x.data();
    for (std::size_t b = 0; b < post; ++b) {
        const double* blk = src + b * in * pre;
        for (std::size_t i = 0; i < in; ++i) {
            const double* ri = blk + i * pre;
            for (std::size_t j = i; j < in; ++j) {
                const double* rj = blk + j * pre;
                double acc = 0.0;
                for (std::size_t c = 0; c < pre; ++c) acc += ri[c] * rj[c];
                s(i, j) += acc;
            }
        }
    }
    for (std::size_t i = 0; i < in; ++i)
        for (std::size_t j = i + 1; j < in; ++j) s(j, i) = s(i, j);
    return s;
}

/// Cross-Gram C = A_(n) * B_(n)^T for two tensors that agree in every mode
/// except possibly mode n. Summation order matches gram(), which makes the
/// assembled distributed Gram matrix exactly symmetric.
inline Matrix gram_cross(const DenseTensor& a, const DenseTensor& b, std::size_t mode) {
    detail::check_mode(a.dims(), mode);
    if (a.order() != b.order())
        throw std::invalid_argument("cross-gram operands differ in order");
    for (std::size_t m = 0; m < a.order(); ++m)
        if (m != mode && a.dim(m) != b.dim(m))
            throw std::invalid_argument("cross-gram operands differ off the gram mode");
    const std::size_t ia = a.dim(mode);
    const std::size_t ib = b.dim(mode);
    const std::size_t pre = detail::product_before(a.dims(), mode);
    const std::size_t post = detail::product_after(a.dims(), mode);
    Matrix c(ia, ib);
    for (std::size_t blk = 0; blk < post; ++blk) {
        const double* ablk = a.data() + blk * ia * pre;
        const double* bblk = b.data() + blk * ib * pre;
        for (std::size_t i = 0; i < ia; ++i) {
            const double* ri = ablk + i * pre;
            for (std::size_t j = 0; j < ib; ++j) {
                const double* rj = bblk + j * pre;
                double acc = 0.0;
                for (std::size_t col = 0; col < pre; ++col) acc += ri[col] * rj[col];
                c(i, j) += acc;
            }
        }
    }
    return c;
}

}  // namespace tuckit
