#pragma once

/// Analytic performance model for the distributed decomposition kernels in
/// the alpha-beta-gamma framework: alpha seconds per message, beta seconds
/// per word moved, gamma seconds per flop.  The estimator evaluates the
/// closed-form per-phase costs of one ST-HOSVD pass or one HOOI outer
/// iteration on an N-way processor grid, plus a per-processor memory bound.
///
/// The estimates deliberately model idealized log-depth collectives; the
/// simulator in this library uses naive reference collectives, so measured
/// ledger volumes are expected to exceed the beta terms reported here.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tuckit {

enum class CostAlgorithm {
    /// One full ST-HOSVD pass (every mode processed once).
    sthosvd,
    /// One outer iteration of HOOI (all N factor updates plus the core).
    hooi_iteration,
};

inline const char* to_string(CostAlgorithm algorithm) {
    switch (algorithm) {
        case CostAlgorithm::sthosvd: return "sthosvd";
        case CostAlgorithm::hooi_iteration: return "hooi-iteration";
    }
    throw std::invalid_argument("unknown cost algorithm");
}

enum class CostPhase {
    ttm,   ///< tensor-times-matrix products (latency is attributed here)
    gram,  ///< Gram matrix formation, including its all-reduce
    eig,   ///< redundant eigenvector computation, including its all-gather
};

inline const char* to_string(CostPhase phase) {
    switch (phase) {
        case CostPhase::ttm: return "ttm";
        case CostPhase::gram: return "gram";
        case CostPhase::eig: return "eig";
    }
    throw std::invalid_argument("unknown cost phase");
}

/// Machine and problem description for the estimator.
struct CostParams {
    double alpha = 0.0;  ///< seconds per message
    double beta = 0.0;   ///< seconds per word
    double gamma = 0.0;  ///< seconds per flop
    std::vector<std::size_t> grid;   ///< processors per mode, P_n
    std::vector<std::size_t> dims;   ///< tensor extents, I_n
    std::vector<std::size_t> ranks;  ///< target core ranks, R_n
    /// Order in which modes are processed; empty means natural order.
    /// Affects which modes count as already-truncated in the TTM and Gram
    /// working-set products.
    std::vector<std::size_t> mode_order;
};

/// One per-phase, per-mode cost contribution, already multiplied by the
/// machine parameters: alpha_term + beta_term + gamma_term is this row's
/// predicted time in seconds.
struct CostTerm {
    CostPhase phase = CostPhase::ttm;
    std::size_t mode = 0;
    double alpha_term = 0.0;
    double beta_term = 0.0;
    double gamma_term = 0.0;

    double total() const { return alpha_term + beta_term + gamma_term; }
};

/// Full estimator output: one row per phase per mode (TTM rows first in
/// processing order, then Gram, then Eig) plus column totals and the
/// per-processor memory bound in 8-byte words.
struct CostReport {
    CostAlgorithm algorithm = CostAlgorithm::sthosvd;
    std::vector<CostTerm> terms;
    double latency_seconds = 0.0;    ///< sum of alpha terms
    double bandwidth_seconds = 0.0;  ///< sum of beta terms
    double flop_seconds = 0.0;       ///< sum of gamma terms
    double total_seconds = 0.0;      ///< sum of all three
    double memory_bound_words = 0.0;
};

namespace detail {

inline void check_cost_params(const CostParams& params) {
    const std::size_t order = params.dims.size();
    if (order == 0) throw std::invalid_argument("cost model requires at least one mode");
    if (params.grid.size() != order || params.ranks.size() != order) {
        throw std::invalid_argument("grid, dims, and ranks must have matching length");
    }
    for (std::size_t n = 0; n < order; ++n) {
        if (params.grid[n] == 0) throw std::invalid_argument("grid entries must be positive");
        if (params.dims[n] == 0) throw std::invalid_argument("dims must be positive");
        if (params.ranks[n] == 0 || params.ranks[n] > params.dims[n]) {
            throw std::invalid_argument("ranks must satisfy 1 <= rank <= dim");
        }
    }
    if (!params.mode_order.empty()) {
        if (params.mode_order.size() != order) {
            throw std::invalid_argument("mode_order must name every mode exactly once");
        }
        std::vector<bool> seen(order, false);
        for (const std::size_t m : params.mode_order) {
            if (m >= order || seen[m]) {
                throw std::invalid_argument("mode_order must name every mode exactly once");
            }
            seen[m] = true;
        }
    }
}

}  // namespace detail

/// Per-processor memory bound for the distributed decomposition, in 8-byte
/// words, evaluated with exact (real-valued) divisions:
///   2 I/P + sum_n R_n I_n / P_n + max_n I_n^2 + max_n R_n I_n
/// where I is the total element count and P the total processor count.
inline double memory_bound_words(std::span<const std::size_t> dims,
                                 std::span<const std::size_t> ranks,
                                 std::span<const std::size_t> grid) {
    double total_elems = 1.0;
    double total_procs = 1.0;
    double factor_sum = 0.0;
    double max_dim_sq = 0.0;
    double max_rank_dim = 0.0;
    for (std::size_t n = 0; n < dims.size(); ++n) {
        const double i = static_cast<double>(dims[n]);
        const double r = static_cast<double>(ranks[n]);
        const double p = static_cast<double>(grid[n]);
        total_elems *= i;
        total_procs *= p;
        factor_sum += r * i / p;
        max_dim_sq = std::max(max_dim_sq, i * i);
        max_rank_dim = std::max(max_rank_dim, r * i);
    }
    return 2.0 * total_elems / total_procs + factor_sum + max_dim_sq + max_rank_dim;
}

/// Same bound with remainder-adjusted block sizes: every per-mode local
/// extent I_n/P_n is replaced by ceil(I_n/P_n), the largest block a rank can
/// own when P_n does not divide I_n.  Peak per-rank allocations of the
/// distributed decomposition are asserted against this variant.
inline double memory_bound_words_blocked(std::span<const std::size_t> dims,
                                         std::span<const std::size_t> ranks,
                                         std::span<const std::size_t> grid) {
    double local_elems = 1.0;
    double factor_sum = 0.0;
    double max_dim_sq = 0.0;
    double max_rank_dim = 0.0;
    for (std::size_t n = 0; n < dims.size(); ++n) {
        const double block = static_cast<double>((dims[n] + grid[n] - 1) / grid[n]);
        const double i = static_cast<double>(dims[n]);
        const double r = static_cast<double>(ranks[n]);
        local_elems *= block;
        factor_sum += r * block;
        max_dim_sq = std::max(max_dim_sq, i * i);
        max_rank_dim = std::max(max_rank_dim, r * i);
    }
    return 2.0 * local_elems + factor_sum + max_dim_sq + max_rank_dim;
}

/// Evaluates the closed-form cost of one ST-HOSVD pass or one HOOI outer
/// iteration.  Message counts use log2 for the tree depth of collectives.
///
/// With P_n the processors, I_n the extents, and R_n the ranks (indexed in
/// processing order), P = prod P_n, Phat_n = P / P_n, and
/// Rhat_n = prod_{m != n} R_m, the per-mode rows are:
///
/// ST-HOSVD:
///   TTM:  alpha P_n log2 P_n
///         + (1/P) (beta (P_n - 1) + 2 gamma I_n)
///                 prod_{k<=n} R_k prod_{k>n} I_k
///   Gram: (1/P) [(2 gamma I_n + 2 (P_n - 1) beta)
///                 prod_{k<n} R_k prod_{k>=n} I_k
///                + 2 beta (Phat_n - 1) I_n^2]
///   Eig:  beta ((P_n - 1)/P_n) I_n^2 + gamma (10/3) I_n^3
///
/// One HOOI outer iteration:
///   TTM:  alpha N P_n log2 P_n
///         + ((N-1)/P) (beta (P_n - 1) + 2 gamma I_n)
///                 prod_{k<=n} R_k prod_{k>n} I_k
///   Gram: (1/P) [(2 beta (P_n - 1) + 2 gamma I_n) I_n Rhat_n
///                + 2 beta I_n^2 (Phat_n - 1)]
///   Eig:  beta ((P_n - 1)/P_n) I_n + gamma (10/3) I_n^3
inline CostReport estimate_cost(const CostParams& params, CostAlgorithm algorithm) {
    detail::check_cost_params(params);
    const std::size_t order = params.dims.size();
    std::vector<std::size_t> mode_order = params.mode_order;
    if (mode_order.empty()) {
        mode_order.resize(order);
        std::iota(mode_order.begin(), mode_order.end(), 0);
    }

    const double n_modes = static_cast<double>(order);
    double total_procs = 1.0;
    for (const std::size_t p : params.grid) total_procs *= static_cast<double>(p);

    // Working-set products in processing order: before step j, the modes of
    // earlier steps are truncated to their ranks and the rest are full size.
    std::vector<double> prefix_ranks(order + 1, 1.0);  // prod of R over steps < j
    std::vector<double> suffix_dims(order + 1, 1.0);   // prod of I over steps > j
    for (std::size_t j = 0; j < order; ++j) {
        prefix_ranks[j + 1] =
            prefix_ranks[j] * static_cast<double>(params.ranks[mode_order[j]]);
    }
    for (std::size_t j = order; j-- > 0;) {
        suffix_dims[j] = suffix_dims[j + 1] * static_cast<double>(params.dims[mode_order[j]]);
    }

    CostReport report;
    report.algorithm = algorithm;
    std::vector<CostTerm> gram_rows;
    std::vector<CostTerm> eig_rows;
    for (std::size_t j = 0; j < order; ++j) {
        const std::size_t n = mode_order[j];
        const double i_n = static_cast<double>(params.dims[n]);
        const double r_n = static_cast<double>(params.ranks[n]);
        const double p_n = static_cast<double>(params.grid[n]);
        const double phat_n = total_procs / p_n;
        const double log_p_n = p_n > 1.0 ? std::log2(p_n) : 0.0;
        // prod_{k<=n} R_k prod_{k>n} I_k and prod_{k<n} R_k prod_{k>=n} I_k
        // with k running over processing steps.
        const double ttm_work = prefix_ranks[j] * r_n * suffix_dims[j + 1];
        const double gram_work = prefix_ranks[j] * i_n * suffix_dims[j + 1];

        CostTerm ttm{CostPhase::ttm, n, 0.0, 0.0, 0.0};
        CostTerm gram{CostPhase::gram, n, 0.0, 0.0, 0.0};
        CostTerm eig{CostPhase::eig, n, 0.0, 0.0, 0.0};
        if (algorithm == CostAlgorithm::sthosvd) {
            ttm.alpha_term = params.alpha * p_n * log_p_n;
            ttm.beta_term = params.beta * (p_n - 1.0) * ttm_work / total_procs;
            ttm.gamma_term = params.gamma * 2.0 * i_n * ttm_work / total_procs;
            gram.beta_term = (params.beta * 2.0 * (p_n - 1.0) * gram_work +
                              params.beta * 2.0 * (phat_n - 1.0) * i_n * i_n) /
                             total_procs;
            gram.gamma_term = params.gamma * 2.0 * i_n * gram_work / total_procs;
            eig.beta_term = params.beta * ((p_n - 1.0) / p_n) * i_n * i_n;
            eig.gamma_term = params.gamma * (10.0 / 3.0) * i_n * i_n * i_n;
        } else {
            const double rhat_n = prefix_ranks[order] / r_n;
            ttm.alpha_term = params.alpha * n_modes * p_n * log_p_n;
            ttm.beta_term =
                params.beta * (n_modes - 1.0) * (p_n - 1.0) * ttm_work / total_procs;
            ttm.gamma_term =
                params.gamma * (n_modes - 1.0) * 2.0 * i_n * ttm_work / total_procs;
            gram.beta_term = (params.beta * 2.0 * (p_n - 1.0) * i_n * rhat_n +
                              params.beta * 2.0 * (phat_n - 1.0) * i_n * i_n) /
                             total_procs;
            gram.gamma_term = params.gamma * 2.0 * i_n * i_n * rhat_n / total_procs;
            eig.beta_term = params.beta * ((p_n - 1.0) / p_n) * i_n;
            eig.gamma_term = params.gamma * (10.0 / 3.0) * i_n * i_n * i_n;
        }
        report.terms.push_back(ttm);
        gram_rows.push_back(gram);
        eig_rows.push_back(eig);
    }
    report.terms.insert(report.terms.end(), gram_rows.begin(), gram_rows.end());
    report.terms.insert(report.terms.end(), eig_rows.begin(), eig_rows.end());

    for (const CostTerm& term : report.terms) {
        report.latency_seconds += term.alpha_term;
        report.bandwidth_seconds += term.beta_term;
        report.flop_seconds += term.gamma_term;
    }
    report.total_seconds =
        report.latency_seconds + report.bandwidth_seconds + report.flop_seconds;
    report.memory_bound_words = memory_bound_words(params.dims, params.ranks, params.grid);
    return report;
}

/// Writes the report as CSV with columns: phase, mode, alpha_term,
/// beta_term, gamma_term.  A final "total" row carries the column sums;
/// values are printed with six significant digits.
inline void write_cost_report_csv(std::ostream& out, const CostReport& report) {
    char buffer[192];
    out << "phase,mode,alpha_term,beta_term,gamma_term\n";
    for (const CostTerm& term : report.terms) {
        std::snprintf(buffer, sizeof(buffer), "%s,%zu,%.6g,%.6g,%.6g",
                      to_string(term.phase), term.mode, term.alpha_term, term.beta_term,
                      term.gamma_term);
        out << buffer << '\n';
    }
    std::snprintf(buffer, sizeof(buffer), "total,,%.6g,%.6g,%.6g", report.latency_seconds,
                  report.bandwidth_seconds, report.flop_seconds);
    out << buffer << '\n';
}

}  // namespace tuckit
