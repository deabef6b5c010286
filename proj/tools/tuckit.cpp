/// Command-line front end for the tensor compression toolkit.
///
/// Subcommands:
///   generate      write a synthetic tensor with known core ranks
///   compress      fit a Tucker model to a tensor file (optionally on a
///                 simulated process grid)
///   reconstruct   expand a model back into a tensor (full or sliced)
///   analyze       per-mode spectra, suggested ranks, compression ratio
///   estimate-cost analytic latency/bandwidth/flop cost as CSV
///   stats         describe a model file
///
/// Exit codes: 0 success, 1 usage error, 2 data/file error.  All floating
/// point output is printed with six significant digits.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "tuckit/tuckit.hpp"

namespace {

/// Command-line mistakes CLI11 cannot catch while parsing (bad value
/// combinations, malformed compound values).  Mapped to exit code 1;
/// file and data failures map to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt6(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.6g", value);
    return buffer;
}

std::string join_x(std::span<const std::size_t> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != 0) out += 'x';
        out += std::to_string(values[i]);
    }
    return out;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string token = text.substr(pos, comma - pos);
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(token, &used);
            if (used != token.size() || token.empty()) throw std::invalid_argument(token);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw UsageError("expected a comma-separated list of indices, got '" + text +
                             "'");
        }
        pos = comma + 1;
        if (comma == text.size()) break;
    }
    return out;
}

tuckit::DecomposeOptions make_options(double tolerance, const std::string& mode_order,
                                      std::size_t hooi_iters, double hooi_tol) {
    if (tolerance <= 0.0 || tolerance >= 1.0) {
        throw UsageError("tolerance must lie in (0, 1)");
    }
    tuckit::DecomposeOptions opts;
    opts.epsilon = tolerance;
    opts.max_hooi_iters = hooi_iters;
    opts.hooi_rel_tol = hooi_tol;
    if (mode_order == "natural") {
        opts.order_strategy = tuckit::ModeOrderStrategy::natural;
    } else if (mode_order == "greedy-flops") {
        opts.order_strategy = tuckit::ModeOrderStrategy::greedy_flops;
    } else if (mode_order == "max-ratio") {
        opts.order_strategy = tuckit::ModeOrderStrategy::max_compression_ratio;
    } else if (mode_order.rfind("explicit:", 0) == 0) {
        opts.order_strategy = tuckit::ModeOrderStrategy::explicit_order;
        opts.explicit_order = parse_index_list(mode_order.substr(9));
    } else {
        throw UsageError("mode order must be natural, greedy-flops, max-ratio, or "
                         "explicit:<comma-separated modes>");
    }
    return opts;
}

void print_model_summary(const tuckit::TuckerModel& model) {
    const std::vector<std::size_t> dims = model.dims();
    const std::vector<std::size_t> ranks = model.ranks();
    const double norm = model.original_norm;
    const double residual_sq =
        std::max(norm * norm - model.core.norm_sq(), 0.0);
    std::cout << "dims: " << join_x(dims) << "\n";
    std::cout << "ranks: " << join_x(ranks) << "\n";
    std::cout << "compression ratio: " << fmt6(tuckit::compression_ratio(dims, ranks))
              << "\n";
    std::cout << "normalized residual: "
              << fmt6(norm == 0.0 ? 0.0 : std::sqrt(residual_sq) / norm) << "\n";
}

// ---------------------------------------------------------------------------
// compress
// ---------------------------------------------------------------------------

struct CompressArgs {
    std::string input;
    std::string output;
    double tolerance = 0.0;
    std::vector<std::size_t> grid;
    std::string mode_order = "max-ratio";
    std::size_t hooi_iters = 0;
    double hooi_tol = 1e-6;
    std::size_t variable_mode = 0;
    bool has_variable_mode = false;
    bool serialize_ranks = false;
};

void run_compress(const CompressArgs& args) {
    tuckit::DenseTensor x = tuckit::read_tensor(args.input);
    std::optional<tuckit::ScalingRecord> scaling;
    if (args.has_variable_mode) {
        if (args.variable_mode >= x.order()) {
            throw UsageError("variable mode " + std::to_string(args.variable_mode) +
                             " out of range for a tensor of order " +
                             std::to_string(x.order()));
        }
        auto [scaled, record] = tuckit::center_scale(x, args.variable_mode);
        x = std::move(scaled);
        scaling = std::move(record);
    }
    const tuckit::DecomposeOptions opts =
        make_options(args.tolerance, args.mode_order, args.hooi_iters, args.hooi_tol);

    if (args.grid.empty()) {
        const tuckit::TuckerModel model =
            args.hooi_iters > 0 ? tuckit::hooi(x, opts) : tuckit::sthosvd(x, opts);
        tuckit::write_model(args.output, {model, scaling});
        print_model_summary(model);
        return;
    }

    if (args.grid.size() != x.order()) {
        throw UsageError("grid must name one processor count per tensor mode (got " +
                         std::to_string(args.grid.size()) + " counts for an order-" +
                         std::to_string(x.order()) + " tensor)");
    }
    tuckit::Simulator sim{tuckit::ProcessGrid(args.grid),
                          args.serialize_ranks ? tuckit::ExecMode::serialized
                                               : tuckit::ExecMode::concurrent};
    // Holds buffers metered by the simulator; declared after it so the
    // buffers are released first, and written out while both are alive.
    tuckit::TuckerModel staged;
    sim.run([&](tuckit::RankContext& ctx) {
        tuckit::DistTensor local = tuckit::distribute(ctx, x);
        tuckit::DistTuckerModel model =
            args.hooi_iters > 0
                ? tuckit::par_hooi(ctx, local, opts)
                : tuckit::par_sthosvd(ctx, std::move(local), opts);
        tuckit::TuckerModel sequential = tuckit::to_sequential(ctx, model);
        if (ctx.rank() == 0) staged = std::move(sequential);
    });
    tuckit::write_model(args.output, {staged, scaling});
    print_model_summary(staged);
}

// ---------------------------------------------------------------------------
// reconstruct
// ---------------------------------------------------------------------------

struct ReconstructArgs {
    std::string input;
    std::string output;
    std::vector<std::string> ranges;
    bool physical_units = false;
};

void run_reconstruct(const ReconstructArgs& args) {
    const tuckit::StoredModel stored = tuckit::read_model(args.input);
    const std::vector<std::size_t> dims = stored.model.dims();
    std::vector<std::optional<std::vector<std::size_t>>> subsets(dims.size());
    for (const std::string& spec : args.ranges) {
        const std::size_t eq = spec.find('=');
        const std::size_t colon = spec.find(':', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || colon == std::string::npos) {
            throw UsageError("range must look like mode=a:b (half-open), got '" + spec +
                             "'");
        }
        std::size_t mode = 0;
        std::size_t lo = 0;
        std::size_t hi = 0;
        try {
            mode = std::stoull(spec.substr(0, eq));
            lo = std::stoull(spec.substr(eq + 1, colon - eq - 1));
            hi = std::stoull(spec.substr(colon + 1));
        } catch (const std::exception&) {
            throw UsageError("range must look like mode=a:b (half-open), got '" + spec +
                             "'");
        }
        if (mode >= dims.size()) {
            throw UsageError("range mode " + std::to_string(mode) +
                             " out of range for an order-" + std::to_string(dims.size()) +
                             " model");
        }
        if (subsets[mode].has_value()) {
            throw UsageError("mode " + std::to_string(mode) + " ranged twice");
        }
        if (lo >= hi || hi > dims[mode]) {
            throw std::invalid_argument("range " + spec + " does not fit extent " +
                                        std::to_string(dims[mode]));
        }
        std::vector<std::size_t> rows(hi - lo);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = lo + i;
        subsets[mode] = std::move(rows);
    }
    tuckit::DenseTensor out = tuckit::reconstruct(stored.model, subsets);
    if (args.physical_units) {
        if (!stored.scaling.has_value()) {
            throw std::invalid_argument(
                "model stores no scaling record; cannot emit physical units");
        }
        tuckit::ScalingRecord record = *stored.scaling;
        if (subsets[record.variable_mode].has_value()) {
            const std::vector<std::size_t>& rows = *subsets[record.variable_mode];
            tuckit::ScalingRecord sliced;
            sliced.variable_mode = record.variable_mode;
            for (const std::size_t r : rows) {
                sliced.means.push_back(record.means[r]);
                sliced.stds.push_back(record.stds[r]);
                sliced.divided.push_back(record.divided[r]);
            }
            record = std::move(sliced);
        }
        out = tuckit::inverse_center_scale(out, record);
    }
    tuckit::write_tensor(args.output, out);
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

void write_curves_csv(const std::string& path,
                      const std::vector<tuckit::ErrorCurve>& curves) {
    std::ofstream out(path);
    if (!out) {
        throw tuckit::FileFormatError(tuckit::FileErrorCode::io_failure,
                                      "cannot open for writing: " + path);
    }
    out << "mode,kept,eigenvalue,normalized_tail\n";
    for (const tuckit::ErrorCurve& curve : curves) {
        for (std::size_t kept = 1; kept <= curve.eigenvalues.size(); ++kept) {
            out << curve.mode << ',' << kept << ',' << fmt6(curve.eigenvalues[kept - 1])
                << ',' << fmt6(curve.normalized_tail[kept]) << '\n';
        }
    }
    if (!out) {
        throw tuckit::FileFormatError(tuckit::FileErrorCode::io_failure,
                                      "write failed: " + path);
    }
}

void run_analyze(const std::string& input, const std::string& curves_out,
                 double tolerance, bool has_tolerance) {
    const tuckit::DenseTensor x = tuckit::read_tensor(input);
    std::cout << "dims: " << join_x(x.dims()) << "\n";
    std::cout << "norm: " << fmt6(x.norm()) << "\n";
    if (!has_tolerance && curves_out.empty()) return;
    const std::vector<tuckit::ErrorCurve> curves = tuckit::error_curves(x);
    if (!curves_out.empty()) write_curves_csv(curves_out, curves);
    if (!has_tolerance) return;
    if (tolerance <= 0.0 || tolerance >= 1.0) {
        throw UsageError("tolerance must lie in (0, 1)");
    }
    const double norm_sq = x.norm_sq();
    std::vector<std::size_t> ranks;
    double bound_sq = 0.0;
    for (const tuckit::ErrorCurve& curve : curves) {
        const std::size_t rank =
            tuckit::choose_rank(curve.eigenvalues, norm_sq, tolerance, x.order());
        ranks.push_back(rank);
        bound_sq += curve.normalized_tail[rank] * curve.normalized_tail[rank];
    }
    std::cout << "tolerance: " << fmt6(tolerance) << "\n";
    std::cout << "ranks: " << join_x(ranks) << "\n";
    std::cout << "compression ratio: " << fmt6(tuckit::compression_ratio(x.dims(), ranks))
              << "\n";
    std::cout << "normalized rms bound: " << fmt6(std::sqrt(bound_sq)) << "\n";
}

// ---------------------------------------------------------------------------
// estimate-cost
// ---------------------------------------------------------------------------

struct CostArgs {
    std::vector<std::size_t> dims;
    std::vector<std::size_t> ranks;
    std::vector<std::size_t> grid;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    std::string algorithm = "sthosvd";
};

void run_estimate_cost(const CostArgs& args) {
    if (args.dims.size() != args.ranks.size() || args.dims.size() != args.grid.size()) {
        throw UsageError("--dims, --ranks, and --grid must have the same length");
    }
    tuckit::CostParams params;
    params.alpha = args.alpha;
    params.beta = args.beta;
    params.gamma = args.gamma;
    params.dims = args.dims;
    params.ranks = args.ranks;
    params.grid = args.grid;
    const tuckit::CostAlgorithm algorithm = args.algorithm == "hooi"
                                                ? tuckit::CostAlgorithm::hooi_iteration
                                                : tuckit::CostAlgorithm::sthosvd;
    tuckit::write_cost_report_csv(std::cout, tuckit::estimate_cost(params, algorithm));
}

// ---------------------------------------------------------------------------
// generate / stats
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::vector<std::size_t> dims;
    std::vector<std::size_t> ranks;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string output;
};

void run_generate(const GenerateArgs& args) {
    tuckit::write_tensor(args.output,
                         tuckit::generate_synthetic(args.dims, args.ranks, args.noise,
                                                    args.seed));
}

void run_stats(const std::string& input) {
    const tuckit::StoredModel stored = tuckit::read_model(input);
    const std::vector<std::size_t> dims = stored.model.dims();
    const std::vector<std::size_t> ranks = stored.model.ranks();
    std::cout << "dims: " << join_x(dims) << "\n";
    std::cout << "ranks: " << join_x(ranks) << "\n";
    std::cout << "compression ratio: " << fmt6(tuckit::compression_ratio(dims, ranks))
              << "\n";
    std::cout << "stored norm: " << fmt6(stored.model.original_norm) << "\n";
    if (stored.scaling.has_value()) {
        std::cout << "scaling: mode " << stored.scaling->variable_mode << "\n";
    } else {
        std::cout << "scaling: none\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tucker compression toolkit for dense tensors"};
    app.require_subcommand(1);

    auto compress_args = std::make_shared<CompressArgs>();
    CLI::App* compress = app.add_subcommand("compress", "fit a Tucker model to a tensor");
    compress->add_option("--input", compress_args->input, "tensor file to compress")
        ->required();
    compress->add_option("--output", compress_args->output, "model file to write")
        ->required();
    compress
        ->add_option("--tolerance", compress_args->tolerance,
                     "relative reconstruction error budget in (0, 1)")
        ->required();
    compress->add_option("--grid", compress_args->grid,
                         "processors per mode for the simulated grid, e.g. 2,2,1")
        ->delimiter(',');
    compress->add_option("--mode-order", compress_args->mode_order,
                         "natural | greedy-flops | max-ratio | explicit:<modes>");
    compress->add_option("--hooi-iters", compress_args->hooi_iters,
                         "refinement sweeps after the initial decomposition");
    compress->add_option("--hooi-tol", compress_args->hooi_tol,
                         "relative fit-change threshold that stops refinement");
    CLI::Option* variable_mode_opt =
        compress->add_option("--variable-mode", compress_args->variable_mode,
                             "center and scale slices along this mode before fitting");
    compress->add_flag("--serialize-ranks", compress_args->serialize_ranks,
                       "run simulated ranks one at a time, deterministically");
    compress->callback([compress_args, variable_mode_opt] {
        compress_args->has_variable_mode = variable_mode_opt->count() > 0;
        run_compress(*compress_args);
    });

    auto reconstruct_args = std::make_shared<ReconstructArgs>();
    CLI::App* reconstruct =
        app.add_subcommand("reconstruct", "expand a model back into a tensor");
    reconstruct->add_option("--input", reconstruct_args->input, "model file to read")
        ->required();
    reconstruct->add_option("--output", reconstruct_args->output, "tensor file to write")
        ->required();
    reconstruct->add_option("--range", reconstruct_args->ranges,
                            "restrict one mode to rows [a, b), written mode=a:b; "
                            "repeatable");
    reconstruct->add_flag("--physical-units", reconstruct_args->physical_units,
                          "undo the stored centering/scaling after reconstruction");
    reconstruct->callback([reconstruct_args] { run_reconstruct(*reconstruct_args); });

    auto analyze_input = std::make_shared<std::string>();
    auto analyze_curves = std::make_shared<std::string>();
    auto analyze_tolerance = std::make_shared<double>(0.0);
    CLI::App* analyze =
        app.add_subcommand("analyze", "per-mode spectra and suggested ranks");
    analyze->add_option("--input", *analyze_input, "tensor file to analyze")->required();
    analyze->add_option("--curves-out", *analyze_curves,
                        "write per-mode truncation-error curves to this CSV file");
    CLI::Option* tolerance_opt = analyze->add_option(
        "--tolerance", *analyze_tolerance,
        "error budget used to suggest ranks and a compression ratio");
    analyze->callback([analyze_input, analyze_curves, analyze_tolerance, tolerance_opt] {
        run_analyze(*analyze_input, *analyze_curves, *analyze_tolerance,
                    tolerance_opt->count() > 0);
    });

    auto cost_args = std::make_shared<CostArgs>();
    CLI::App* cost =
        app.add_subcommand("estimate-cost", "analytic cost model, written as CSV");
    cost->add_option("--dims", cost_args->dims, "tensor extents, e.g. 128,128,64")
        ->required()
        ->delimiter(',');
    cost->add_option("--ranks", cost_args->ranks, "core ranks, e.g. 16,16,8")
        ->required()
        ->delimiter(',');
    cost->add_option("--grid", cost_args->grid, "processors per mode, e.g. 4,4,2")
        ->required()
        ->delimiter(',');
    cost->add_option("--alpha", cost_args->alpha, "seconds per message")->required();
    cost->add_option("--beta", cost_args->beta, "seconds per word moved")->required();
    cost->add_option("--gamma", cost_args->gamma, "seconds per floating-point operation")
        ->required();
    cost->add_option("--algorithm", cost_args->algorithm, "sthosvd | hooi")
        ->check(CLI::IsMember({"sthosvd", "hooi"}));
    cost->callback([cost_args] { run_estimate_cost(*cost_args); });

    auto generate_args = std::make_shared<GenerateArgs>();
    CLI::App* generate =
        app.add_subcommand("generate", "write a synthetic tensor with known ranks");
    generate->add_option("--dims", generate_args->dims, "tensor extents")
        ->required()
        ->delimiter(',');
    generate->add_option("--ranks", generate_args->ranks, "planted core ranks")
        ->required()
        ->delimiter(',');
    generate->add_option("--noise", generate_args->noise,
                         "white-noise level relative to the signal norm");
    generate->add_option("--seed", generate_args->seed, "generator seed");
    generate->add_option("--output", generate_args->output, "tensor file to write")
        ->required();
    generate->callback([generate_args] { run_generate(*generate_args); });

    auto stats_input = std::make_shared<std::string>();
    CLI::App* stats = app.add_subcommand("stats", "describe a model file");
    stats->add_option("--input", *stats_input, "model file to read")->required();
    stats->callback([stats_input] { run_stats(*stats_input); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const tuckit::FileFormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
