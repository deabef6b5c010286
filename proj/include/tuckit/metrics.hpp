#pragma once

/// Compression and reconstruction analytics: mode-wise error-tail curves,
/// the storage compression ratio, and reconstruction error metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tuckit/decompose.hpp"
#include "tuckit/eig.hpp"
#include "tuckit/kernels.hpp"
#include "tuckit/tensor.hpp"

namespace tuckit {

/// Mode-wise truncation-error curve: the Gram spectrum of one mode together
/// with the normalized residual that truncating that mode to R leading
/// eigenvectors would contribute, for every R from 0 to the mode size.
struct ErrorCurve {
    /// Mode the curve describes.
    std::size_t mode = 0;
    /// Gram eigenvalues of this mode, in non-increasing order.
    std::vector<double> eigenvalues;
    /// normalized_tail[R] = sqrt(sum of eigenvalues past the first R) / |X|,
    /// for R = 0..dim(mode).  Entry 0 is 1 (full energy), the last entry 0.
    std::vector<double> normalized_tail;
};

/// Computes one ErrorCurve per mode.  Eigenvalues within round-off noise of
/// zero (relative to the leading one) are treated as exactly zero in the
/// tail sums, so exactly low-rank inputs produce tails that reach zero at
/// the true rank.  An all-zero tensor yields all-zero curves.
inline std::vector<ErrorCurve> error_curves(const DenseTensor& x) {
    const double norm = x.norm();
    std::vector<ErrorCurve> curves;
    curves.reserve(x.order());
    for (std::size_t mode = 0; mode < x.order(); ++mode) {
        const EigResult eig = eig_sym(gram(x, mode));
        ErrorCurve curve;
        curve.mode = mode;
        curve.eigenvalues.assign(eig.eigenvalues.begin(), eig.eigenvalues.end());
        const std::vector<double> clipped = detail::clipped_spectrum(curve.eigenvalues);
        const std::size_t n = clipped.size();
        curve.normalized_tail.assign(n + 1, 0.0);
        double tail = 0.0;
        for (std::size_t r = n; r-- > 0;) {
            tail += clipped[r];
            curve.normalized_tail[r] =
                norm == 0.0 ? 0.0 : std::sqrt(std::max(tail, 0.0)) / norm;
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

/// Storage compression ratio of a Tucker model with the given core ranks:
/// (number of tensor elements) / (core elements + factor elements).
inline double compression_ratio(std::span<const std::size_t> dims,
                                std::span<const std::size_t> ranks) {
    if (dims.empty() || dims.size() != ranks.size()) {
        throw std::invalid_argument("dims and ranks must have the same nonzero length");
    }
    double elements = 1.0;
    double core = 1.0;
    double factors = 0.0;
    for (std::size_t n = 0; n < dims.size(); ++n) {
        if (ranks[n] == 0 || ranks[n] > dims[n]) {
            throw std::invalid_argument("ranks must satisfy 1 <= rank <= dim");
        }
        elements *= static_cast<double>(dims[n]);
        core *= static_cast<double>(ranks[n]);
        factors += static_cast<double>(dims[n]) * static_cast<double>(ranks[n]);
    }
    return elements / (core + factors);
}

/// Reconstruction quality of an approximation against the original tensor.
struct ErrorMetrics {
    /// |X - approx| / |X| (Frobenius).  Zero when the pair is identical.
    double normalized_rms = 0.0;
    /// Largest absolute elementwise difference.
    double max_abs_error = 0.0;
};

inline ErrorMetrics error_metrics(const DenseTensor& x, const DenseTensor& approx) {
    if (x.dims() != approx.dims()) {
        throw std::invalid_argument("error_metrics requires tensors of identical shape");
    }
    double diff_sq = 0.0;
    double max_abs = 0.0;
    const double* a = x.data();
    const double* b = approx.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = a[i] - b[i];
        diff_sq += d * d;
        max_abs = std::max(max_abs, std::abs(d));
    }
    const double diff_norm = std::sqrt(diff_sq);
    ErrorMetrics metrics;
    metrics.normalized_rms = diff_norm == 0.0 ? 0.0 : diff_norm / x.norm();
    metrics.max_abs_error = max_abs;
    return metrics;
}

/// Writes curves as CSV with columns: mode, R, normalized_tail.
/// Values are printed with six significant digits.
inline void write_error_curves_csv(std::ostream& out, std::span<const ErrorCurve> curves) {
    out << "mode,R,normalized_tail\n";
    char buffer[64];
    for (const ErrorCurve& curve : curves) {
        for (std::size_t r = 0; r < curve.normalized_tail.size(); ++r) {
            std::snprintf(buffer, sizeof(buffer), "%.6g", curve.normalized_tail[r]);
            out << curve.mode << ',' << r << ',' << buffer << '\n';
        }
    }
}

}  // namespace tuckit
