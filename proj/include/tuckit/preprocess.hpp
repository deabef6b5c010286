#pragma once

/// Per-slice centering and scaling along a designated "variable" mode,
/// plus the inverse transform that restores physical units.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tuckit/tensor.hpp"

namespace tuckit {

/// Smallest standard deviation that is still divided out.  Slices whose
/// (population) standard deviation falls below this threshold are centered
/// but not scaled, so near-constant variables do not blow up.
inline constexpr double kMinScalingStd = 1e-10;

/// Record of the affine transform applied by center_scale, sufficient to
/// undo it exactly (up to round-off).
struct ScalingRecord {
    /// Mode whose slices were treated as separate variables.
    std::size_t variable_mode = 0;
    /// Per-slice mean, length dim(variable_mode).
    std::vector<double> means;
    /// Per-slice population standard deviation, length dim(variable_mode).
    std::vector<double> stds;
    /// Per-slice flag: true when the slice was divided by its std.
    /// False entries correspond to stds below kMinScalingStd.
    std::vector<std::uint8_t> divided;

    std::size_t slice_count() const { return means.size(); }
};

namespace detail {

/// Applies f(slice_index, linear_index) to every element of x, where
/// slice_index is the element's coordinate along `mode`.
template <typename F>
void for_each_slice_element(const std::vector<std::size_t>& dims, std::size_t mode, F&& f) {
    const std::size_t pre = product_before(dims, mode);
    const std::size_t post = product_after(dims, mode);
    const std::size_t len = dims[mode];
    std::size_t linear = 0;
    for (std::size_t b = 0; b < post; ++b) {
        for (std::size_t k = 0; k < len; ++k) {
            for (std::size_t c = 0; c < pre; ++c) {
                f(k, linear);
                ++linear;
            }
        }
    }
}

}  // namespace detail

/// Centers every slice of x along variable_mode to zero mean and divides it
/// by its population standard deviation unless that std is below
/// kMinScalingStd (in which case the slice is only centered).  Returns the
/// transformed tensor and the record needed to invert the transform.
inline std::pair<DenseTensor, ScalingRecord> center_scale(const DenseTensor& x,
                                                          std::size_t variable_mode) {
    detail::check_mode(x.dims(), variable_mode);
    const std::size_t slices = x.dim(variable_mode);
    const double slice_elems =
        static_cast<double>(x.size()) / static_cast<double>(slices);

    ScalingRecord record;
    record.variable_mode = variable_mode;
    record.means.assign(slices, 0.0);
    record.stds.assign(slices, 0.0);
    record.divided.assign(slices, 0);

    const double* src = x.data();
    detail::for_each_slice_element(x.dims(), variable_mode,
                                   [&](std::size_t s, std::size_t l) { record.means[s] += src[l]; });
    for (double& m : record.means) m /= slice_elems;

    detail::for_each_slice_element(x.dims(), variable_mode, [&](std::size_t s, std::size_t l) {
        const double d = src[l] - record.means[s];
        record.stds[s] += d * d;
    });
    for (std::size_t s = 0; s < slices; ++s) {
        record.stds[s] = std::sqrt(record.stds[s] / slice_elems);
        record.divided[s] = record.stds[s] < kMinScalingStd ? 0 : 1;
    }

    DenseTensor out = x;
    double* dst = out.data();
    detail::for_each_slice_element(out.dims(), variable_mode, [&](std::size_t s, std::size_t l) {
        dst[l] -= record.means[s];
        if (record.divided[s]) dst[l] /= record.stds[s];
    });
    return {std::move(out), std::move(record)};
}

/// Undoes center_scale: multiplies each slice by its recorded std (when it
/// was divided) and adds back the recorded mean.
inline DenseTensor inverse_center_scale(const DenseTensor& x, const ScalingRecord& record) {
    detail::check_mode(x.dims(), record.variable_mode);
    const std::size_t slices = x.dim(record.variable_mode);
    if (record.means.size() != slices || record.stds.size() != slices ||
        record.divided.size() != slices) {
        throw std::invalid_argument("scaling record does not match tensor shape");
    }
    DenseTensor out = x;
    double* dst = out.data();
    detail::for_each_slice_element(out.dims(), record.variable_mode,
                                   [&](std::size_t s, std::size_t l) {
                                       if (record.divided[s]) dst[l] *= record.stds[s];
                                       dst[l] += record.means[s];
                                   });
    return out;
}

}  // namespace tuckit
