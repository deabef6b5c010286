/// Tests for the block distribution and the distributed Tucker kernels.
/// Every kernel is checked against its sequential twin (bitwise on a
/// single-rank grid, within pinned tolerances otherwise), communication
/// volumes are checked against closed forms, redundant copies are checked
/// for bit-identity, and the distributed ST-HOSVD peak memory is checked
/// against the analytic per-rank bound.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "tuckit/cost_model.hpp"
#include "tuckit/decompose.hpp"
#include "tuckit/dist_tensor.hpp"
#include "tuckit/grid.hpp"
#include "tuckit/kernels.hpp"
#include "tuckit/par_decompose.hpp"
#include "tuckit/par_kernels.hpp"
#include "tuckit/sim.hpp"
#include "tuckit/tensor.hpp"

#include "test_util.hpp"

namespace {

using tuckit::block_range;
using tuckit::BlockRange;
using tuckit::CommLedger;
using tuckit::CommOp;
using tuckit::DecomposeOptions;
using tuckit::DenseTensor;
using tuckit::DistFactorMatrix;
using tuckit::DistTensor;
using tuckit::DistTuckerModel;
using tuckit::DVec;
using tuckit::Matrix;
using tuckit::ProcessGrid;
using tuckit::RankContext;
using tuckit::Simulator;
using tuckit::TuckerModel;

double max_abs_diff_span(std::span<const double> a, std::span<const double> b) {
    EXPECT_EQ(a.size(), b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// ---------------------------------------------------------------------------
// Block map
// ---------------------------------------------------------------------------

TEST(BlockRangeMap, EvenSplit) {
    for (std::size_t part = 0; part < 4; ++part) {
        const BlockRange r = block_range(12, 4, part);
        EXPECT_EQ(r.len, 3u);
        EXPECT_EQ(r.lo, 3 * part);
    }
}

TEST(BlockRangeMap, RemainderGoesToLeadingParts) {
    // 11 over 3: lengths 4, 4, 3.
    EXPECT_EQ(block_range(11, 3, 0).lo, 0u);
    EXPECT_EQ(block_range(11, 3, 0).len, 4u);
    EXPECT_EQ(block_range(11, 3, 1).lo, 4u);
    EXPECT_EQ(block_range(11, 3, 1).len, 4u);
    EXPECT_EQ(block_range(11, 3, 2).lo, 8u);
    EXPECT_EQ(block_range(11, 3, 2).len, 3u);
}

TEST(BlockRangeMap, PartsTileTheExtentForAnyRemainder) {
    for (std::size_t extent = 1; extent <= 20; ++extent) {
        for (std::size_t parts = 1; parts <= extent; ++parts) {
            std::size_t next = 0;
            for (std::size_t part = 0; part < parts; ++part) {
                const BlockRange r = block_range(extent, parts, part);
                EXPECT_EQ(r.lo, next);
                next = r.lo + r.len;
            }
            EXPECT_EQ(next, extent);
        }
    }
}

TEST(BlockRangeMap, RejectsBadPartIndex) {
    EXPECT_THROW(block_range(10, 0, 0), std::invalid_argument);
    EXPECT_THROW(block_range(10, 3, 3), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// distribute / gather
// ---------------------------------------------------------------------------

TEST(Distribution, SingleRankGridKeepsTheWholeTensor) {
    const DenseTensor x = testutil::random_tensor({4, 5, 3}, 11);
    Simulator sim(ProcessGrid({1, 1, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor d = tuckit::distribute(ctx, x);
        EXPECT_EQ(d.global_dims, x.dims());
        EXPECT_EQ(d.local.dims(), x.dims());
        EXPECT_EQ(max_abs_diff_span(d.local.values(), x.values()), 0.0);
    });
}

TEST(Distribution, BlocksFollowTheCartesianMap) {
    // 4x6 tensor on a 2x3 grid: the rank at coordinates (1, 0) owns global
    // rows 2..3 and columns 0..1.
    DenseTensor x({4, 6});
    for (std::size_t j = 0; j < 6; ++j)
        for (std::size_t i = 0; i < 4; ++i)
            x.data()[i + 4 * j] = static_cast<double>(10 * i + j);
    Simulator sim(ProcessGrid({2, 3}));
    sim.run([&](RankContext& ctx) {
        const DistTensor d = tuckit::distribute(ctx, x);
        if (ctx.coords() == std::vector<std::size_t>{1, 0}) {
            ASSERT_EQ(d.local.dims(), (std::vector<std::size_t>{2, 2}));
            EXPECT_EQ(d.local.values()[0], 20.0);  // (2, 0)
            EXPECT_EQ(d.local.values()[1], 30.0);  // (3, 0)
            EXPECT_EQ(d.local.values()[2], 21.0);  // (2, 1)
            EXPECT_EQ(d.local.values()[3], 31.0);  // (3, 1)
        }
    });
}

TEST(Distribution, RoundTripIsBitwiseOnEveryRank) {
    const DenseTensor x = testutil::random_tensor({8, 9, 10}, 23);
    Simulator sim(ProcessGrid({2, 3, 2}));
    std::vector<int> checked(12, 0);
    sim.run([&](RankContext& ctx) {
        const DistTensor d = tuckit::distribute(ctx, x);
        const DenseTensor back = tuckit::gather(ctx, d);
        EXPECT_EQ(back.dims(), x.dims());
        EXPECT_EQ(max_abs_diff_span(back.values(), x.values()), 0.0);
        checked[ctx.rank()] = 1;
    });
    for (const int c : checked) EXPECT_EQ(c, 1);
}

TEST(Distribution, RejectsMoreProcessorsThanIndices) {
    const DenseTensor x = testutil::random_tensor({2, 5}, 3);
    Simulator sim(ProcessGrid({4, 1}));
    EXPECT_THROW(sim.run([&](RankContext& ctx) { tuckit::distribute(ctx, x); }),
                 std::invalid_argument);
}

TEST(Distribution, FactorBlockColumnsCarveTheMatrix) {
    Matrix v(3, 7);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 7; ++c) v(r, c) = static_cast<double>(10 * r + c);
    Simulator sim(ProcessGrid({2, 2}));
    sim.run([&](RankContext& ctx) {
        const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 0);
        const std::size_t part = ctx.coords()[0];
        const BlockRange range = block_range(7, 2, part);
        ASSERT_EQ(f.local.rows(), 3u);
        ASSERT_EQ(f.local.cols(), range.len);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t j = 0; j < range.len; ++j)
                EXPECT_EQ(f.local(r, j), v(r, range.lo + j));
        const Matrix back = tuckit::gather_factor(ctx, f);
        EXPECT_EQ(max_abs_diff_span(back.values(), v.values()), 0.0);
    });
}

// ---------------------------------------------------------------------------
// par_ttm
// ---------------------------------------------------------------------------

TEST(ParTtm, SingleRankGridMatchesSequentialBitwise) {
    const DenseTensor x = testutil::random_tensor({6, 5, 4}, 7);
    const Matrix v = testutil::random_matrix(3, 5, 9);  // K=3, J=5, mode 1
    const DenseTensor expected = tuckit::ttm(x, v, 1, /*transpose=*/false);
    Simulator sim(ProcessGrid({1, 1, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 1);
        const DistTensor z = tuckit::par_ttm(ctx, y, f);
        EXPECT_EQ(z.global_dims, expected.dims());
        EXPECT_EQ(max_abs_diff_span(z.local.values(), expected.values()), 0.0);
    });
}

TEST(ParTtm, GatheredResultMatchesSequentialOracle) {
    const DenseTensor x = testutil::random_tensor({8, 8, 8}, 31);
    const Matrix v = testutil::random_matrix(4, 8, 33);  // K=4 on mode 2
    const DenseTensor expected = tuckit::ttm(x, v, 2, /*transpose=*/false);
    Simulator sim(ProcessGrid({2, 2, 2}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 2);
        const DenseTensor z = tuckit::gather(ctx, tuckit::par_ttm(ctx, y, f));
        EXPECT_LE(max_abs_diff_span(z.values(), expected.values()),
                  1e-13 * expected.norm());
    });
}

TEST(ParTtm, SmallOutputVariantMatchesTheOracle) {
    // K * P_n < J_n triggers the single-multiply + single-summation path.
    const DenseTensor x = testutil::random_tensor({9, 4, 4}, 41);
    const Matrix v = testutil::random_matrix(3, 9, 43);  // 3 * 2 < 9
    const DenseTensor expected = tuckit::ttm(x, v, 0, /*transpose=*/false);
    Simulator sim(ProcessGrid({2, 2, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 0);
        const DenseTensor z = tuckit::gather(ctx, tuckit::par_ttm(ctx, y, f));
        EXPECT_LE(max_abs_diff_span(z.values(), expected.values()),
                  1e-13 * expected.norm());
    });
}

TEST(ParTtm, NoCommunicationWhenTheModeIsNotSplit) {
    const DenseTensor x = testutil::random_tensor({6, 6, 6}, 51);
    const Matrix v = testutil::random_matrix(4, 6, 53);
    Simulator sim(ProcessGrid({1, 2, 2}));  // mode 0 unsplit
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 0);
        const DistTensor z = tuckit::par_ttm(ctx, y, f);
        EXPECT_EQ(z.local.dim(0), 4u);
    });
    const tuckit::CommCounters total = sim.ledger_snapshot().grand_total();
    EXPECT_EQ(total.words_sent, 0u);
    EXPECT_EQ(total.words_received, 0u);
}

TEST(ParTtm, ReductionVolumeMatchesTheClosedForm) {
    // 8x8x8 on 2x2x2, K=4 on mode 2, blocked path (4*2 >= 8). Local rest
    // size is 4*4 = 16 and the output parts have length 2, so each rank
    // sends one partial of 2*16 words to the other part's root and receives
    // one partial of its own 2*16 words.
    const DenseTensor x = testutil::random_tensor({8, 8, 8}, 61);
    const Matrix v = testutil::random_matrix(4, 8, 63);
    Simulator sim(ProcessGrid({2, 2, 2}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 2);
        tuckit::par_ttm(ctx, y, f);
    });
    const CommLedger ledger = sim.ledger_snapshot();
    for (std::size_t r = 0; r < 8; ++r) {
        const tuckit::CommCounters& c = ledger.at(r, CommOp::reduce);
        EXPECT_EQ(c.messages_sent, 1u) << "rank " << r;
        EXPECT_EQ(c.words_sent, 32u) << "rank " << r;
        EXPECT_EQ(c.words_received, 32u) << "rank " << r;
    }
    EXPECT_EQ(ledger.grand_total().messages_sent, 8u);
}

TEST(ParTtm, RejectsOutputSmallerThanTheGridMode) {
    const DenseTensor x = testutil::random_tensor({6, 6}, 71);
    const Matrix v = testutil::random_matrix(2, 6, 73);  // K=2 < P_0=3
    Simulator sim(ProcessGrid({3, 1}));
    EXPECT_THROW(sim.run([&](RankContext& ctx) {
                     const DistTensor y = tuckit::distribute(ctx, x);
                     const DistFactorMatrix f = tuckit::distribute_factor(ctx, v, 0);
                     tuckit::par_ttm(ctx, y, f);
                 }),
                 std::invalid_argument);
}

// ---------------------------------------------------------------------------
// par_gram
// ---------------------------------------------------------------------------

TEST(ParGram, SingleRankGridMatchesSequentialBitwise) {
    const DenseTensor x = testutil::random_tensor({5, 4, 3}, 81);
    const Matrix expected = tuckit::gram(x, 1);
    Simulator sim(ProcessGrid({1, 1, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix s = tuckit::par_gram(ctx, y, 1);
        const Matrix full = tuckit::gather_factor(ctx, s);
        EXPECT_EQ(max_abs_diff_span(full.values(), expected.values()), 0.0);
    });
}

TEST(ParGram, AssembledMatrixMatchesTheOracle) {
    const DenseTensor x = testutil::random_tensor({6, 6, 6}, 91);
    const Matrix expected = tuckit::gram(x, 0);
    Simulator sim(ProcessGrid({3, 1, 2}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const Matrix full = tuckit::gather_factor(ctx, tuckit::par_gram(ctx, y, 0));
        double scale = 0.0;
        for (const double v : expected.values()) scale = std::max(scale, std::abs(v));
        EXPECT_LE(max_abs_diff_span(full.values(), expected.values()), 1e-12 * scale);
    });
}

TEST(ParGram, AssembledMatrixIsExactlySymmetric) {
    const DenseTensor x = testutil::random_tensor({7, 5, 4}, 101);  // remainder blocks
    Simulator sim(ProcessGrid({3, 2, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const Matrix full = tuckit::gather_factor(ctx, tuckit::par_gram(ctx, y, 0));
        for (std::size_t i = 0; i < full.rows(); ++i)
            for (std::size_t j = 0; j < full.cols(); ++j)
                EXPECT_EQ(full(i, j), full(j, i));
    });
}

TEST(ParGram, RingVolumeMatchesTheClosedForm) {
    // 6x6x6 on 3x1x2: J/P = 36 local words; along mode 0 each rank sends its
    // block to the other P_n - 1 = 2 members and receives theirs: 72 words
    // each way of point-to-point traffic per rank.
    const DenseTensor x = testutil::random_tensor({6, 6, 6}, 111);
    Simulator sim(ProcessGrid({3, 1, 2}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        tuckit::par_gram(ctx, y, 0);
    });
    const CommLedger ledger = sim.ledger_snapshot();
    for (std::size_t r = 0; r < 6; ++r) {
        const tuckit::CommCounters& c = ledger.at(r, CommOp::point_to_point);
        EXPECT_EQ(c.messages_sent, 2u) << "rank " << r;
        EXPECT_EQ(c.words_sent, 72u) << "rank " << r;
        EXPECT_EQ(c.words_received, 72u) << "rank " << r;
    }
}

TEST(ParGram, OnlyAllReduceWhenTheModeIsNotSplit) {
    const DenseTensor x = testutil::random_tensor({4, 4, 4, 4}, 121);
    Simulator sim(ProcessGrid({1, 2, 2, 2}));  // P_0 = 1, processor row size 8
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        tuckit::par_gram(ctx, y, 0);
    });
    const CommLedger ledger = sim.ledger_snapshot();
    EXPECT_EQ(ledger.op_total(CommOp::point_to_point).words_sent, 0u);
    EXPECT_EQ(ledger.op_total(CommOp::reduce).words_sent, 0u);
    EXPECT_GT(ledger.op_total(CommOp::all_reduce).words_sent, 0u);
}

TEST(ParGram, BlockColumnsAreReplicatedBitwiseAcrossTheProcessorRow) {
    const DenseTensor x = testutil::random_tensor({6, 4, 4}, 131);
    Simulator sim(ProcessGrid({2, 2, 2}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistFactorMatrix s = tuckit::par_gram(ctx, y, 0);
        // Everyone sharing this rank's mode-0 coordinate must hold the same
        // bytes; gather the copies and compare against this rank's.
        const tuckit::FiberGroup row = ctx.grid().proc_row(ctx.rank(), 0);
        const DVec copies = ctx.all_gather(row, s.local.values());
        const std::size_t width = s.local.size();
        ASSERT_EQ(copies.size(), width * row.size());
        for (std::size_t member = 0; member < row.size(); ++member)
            for (std::size_t i = 0; i < width; ++i)
                EXPECT_EQ(copies[member * width + i], s.local.values()[i]);
    });
}

// ---------------------------------------------------------------------------
// par_eigenvectors
// ---------------------------------------------------------------------------

TEST(ParEigenvectors, DiagonalMatrixYieldsSignedIdentityBlocks) {
    Matrix s(4, 4);
    s(0, 0) = 4.0;
    s(1, 1) = 3.0;
    s(2, 2) = 2.0;
    s(3, 3) = 1.0;
    Simulator sim(ProcessGrid({2, 2}));
    sim.run([&](RankContext& ctx) {
        const DistFactorMatrix blocks = tuckit::distribute_factor(ctx, s, 0);
        const DistFactorMatrix u = tuckit::par_eigenvectors(ctx, blocks, 2);
        ASSERT_EQ(u.local.rows(), 2u);
        ASSERT_EQ(u.local.cols(), 2u);
        if (ctx.coords()[0] == 0) {
            EXPECT_EQ(u.local(0, 0), 1.0);
            EXPECT_EQ(u.local(0, 1), 0.0);
            EXPECT_EQ(u.local(1, 0), 0.0);
            EXPECT_EQ(u.local(1, 1), 1.0);
        } else {
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(u.local(r, c), 0.0);
        }
    });
}

TEST(ParEigenvectors, MatchesTheSequentialEigensolver) {
    // Positive semidefinite matrix with a well-separated spectrum.
    const DenseTensor base = testutil::random_tensor({6, 9}, 141);
    const Matrix s = tuckit::gram(base, 0);
    const tuckit::EigResult expected = tuckit::eig_leading(s, 4);
    Simulator sim(ProcessGrid({2, 3}));
    sim.run([&](RankContext& ctx) {
        const DistFactorMatrix blocks = tuckit::distribute_factor(ctx, s, 0);
        const DistFactorMatrix u = tuckit::par_eigenvectors(ctx, blocks, 4);
        const Matrix v = tuckit::gather_factor(ctx, u);  // 4 x 6
        ASSERT_EQ(v.rows(), 4u);
        ASSERT_EQ(v.cols(), 6u);
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 6; ++c)
                EXPECT_NEAR(v(r, c), expected.vectors(c, r), 1e-10);
    });
}

TEST(ParEigenvectors, ChooserSeesTheFullSpectrum) {
    const DenseTensor base = testutil::random_tensor({5, 8}, 151);
    const Matrix s = tuckit::gram(base, 0);
    const tuckit::EigResult expected = tuckit::eig_sym(s);
    Simulator sim(ProcessGrid({5, 1}));
    sim.run([&](RankContext& ctx) {
        const DistFactorMatrix blocks = tuckit::distribute_factor(ctx, s, 0);
        const tuckit::ParEig e =
            tuckit::par_eigenvectors(ctx, blocks, [](std::span<const double> spectrum) {
                EXPECT_EQ(spectrum.size(), 5u);
                return std::size_t{2};
            });
        EXPECT_EQ(e.rank, 2u);
        ASSERT_EQ(e.eigenvalues.size(), 5u);
        for (std::size_t i = 0; i < 5; ++i)
            EXPECT_EQ(e.eigenvalues[i], expected.eigenvalues[i]);
        EXPECT_EQ(e.factor.local.rows(), 2u);
        EXPECT_EQ(e.factor.local.cols(), 1u);  // 5 columns over 5 parts
    });
}

// ---------------------------------------------------------------------------
// par_sthosvd
// ---------------------------------------------------------------------------

TEST(ParSthosvd, SingleRankGridReproducesSequentialBitwise) {
    const DenseTensor x = testutil::random_tensor({6, 5, 4}, 161);
    DecomposeOptions opts;
    opts.epsilon = 0.4;
    const TuckerModel expected = tuckit::sthosvd(x, opts);
    Simulator sim(ProcessGrid({1, 1, 1}));
    sim.run([&](RankContext& ctx) {
        DistTensor y = tuckit::distribute(ctx, x);
        const DistTuckerModel model = tuckit::par_sthosvd(ctx, std::move(y), opts);
        EXPECT_EQ(model.ranks(), expected.ranks());
        EXPECT_EQ(model.original_norm, expected.original_norm);
        EXPECT_EQ(max_abs_diff_span(model.core.local.values(), expected.core.values()),
                  0.0);
        for (std::size_t m = 0; m < 3; ++m) {
            const Matrix v = tuckit::gather_factor(ctx, model.factors[m]);
            const Matrix& u = expected.factors[m];
            ASSERT_EQ(v.rows(), u.cols());
            ASSERT_EQ(v.cols(), u.rows());
            for (std::size_t r = 0; r < v.rows(); ++r)
                for (std::size_t c = 0; c < v.cols(); ++c) EXPECT_EQ(v(r, c), u(c, r));
        }
    });
}

TEST(ParSthosvd, RecoversAnExactlyLowRankTensor) {
    const DenseTensor x = testutil::low_rank_tensor({12, 12, 12}, {3, 3, 3}, 171);
    DecomposeOptions opts;
    opts.epsilon = 1e-8;
    Simulator sim(ProcessGrid({2, 2, 1}));
    sim.run([&](RankContext& ctx) {
        DistTensor y = tuckit::distribute(ctx, x);
        const DistTuckerModel model = tuckit::par_sthosvd(ctx, std::move(y), opts);
        EXPECT_EQ(model.ranks(), (std::vector<std::size_t>{3, 3, 3}));
        const TuckerModel gathered = tuckit::to_sequential(ctx, model);
        const DenseTensor back = tuckit::reconstruct(gathered);
        EXPECT_LE(max_abs_diff_span(back.values(), x.values()), 1e-10 * x.norm());
    });
}

TEST(ParSthosvd, GridsAgreeOnRanksAndError) {
    const DenseTensor x = testutil::random_tensor({16, 16, 16}, 181);
    DecomposeOptions opts;
    opts.epsilon = 0.3;
    const std::vector<std::vector<std::size_t>> grids{{2, 1, 1}, {2, 2, 1}, {2, 2, 2}};

    std::vector<std::vector<std::size_t>> ranks;
    std::vector<double> errors;
    for (const std::vector<std::size_t>& grid_dims : grids) {
        Simulator sim{ProcessGrid(grid_dims)};
        std::vector<std::size_t> run_ranks;
        double run_error = -1.0;
        sim.run([&](RankContext& ctx) {
            DistTensor y = tuckit::distribute(ctx, x);
            const DistTuckerModel model = tuckit::par_sthosvd(ctx, std::move(y), opts);
            if (ctx.rank() == 0) {
                run_ranks = model.ranks();
                const TuckerModel gathered = tuckit::to_sequential(ctx, model);
                const DenseTensor back = tuckit::reconstruct(gathered);
                double err_sq = 0.0;
                for (std::size_t i = 0; i < back.size(); ++i) {
                    const double d = back.values()[i] - x.values()[i];
                    err_sq += d * d;
                }
                run_error = std::sqrt(err_sq) / x.norm();
            } else {
                const TuckerModel gathered = tuckit::to_sequential(ctx, model);
                (void)gathered;
            }
        });
        ranks.push_back(run_ranks);
        errors.push_back(run_error);
        EXPECT_LE(run_error, 0.3);
    }
    for (std::size_t g = 1; g < grids.size(); ++g) {
        EXPECT_EQ(ranks[g], ranks[0]);
        EXPECT_NEAR(errors[g], errors[0], 1e-12);
    }
}

TEST(ParSthosvd, PeakRankMemoryStaysWithinTheAnalyticBound) {
    const DenseTensor x = testutil::low_rank_tensor({12, 12, 12}, {3, 3, 3}, 191);
    DecomposeOptions opts;
    opts.epsilon = 1e-6;
    const std::vector<std::size_t> grid_dims{2, 2, 1};
    Simulator sim{ProcessGrid(grid_dims)};
    std::vector<std::size_t> ranks_seen;
    sim.run([&](RankContext& ctx) {
        DistTensor y = tuckit::distribute(ctx, x);
        const DistTuckerModel model = tuckit::par_sthosvd(ctx, std::move(y), opts);
        if (ctx.rank() == 0) ranks_seen = model.ranks();
    });
    ASSERT_EQ(ranks_seen, (std::vector<std::size_t>{3, 3, 3}));
    const double bound =
        tuckit::memory_bound_words_blocked(x.dims(), ranks_seen, grid_dims);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_LE(static_cast<double>(sim.peak_memory_words(r)), bound) << "rank " << r;
    }
}

// ---------------------------------------------------------------------------
// par_hooi
// ---------------------------------------------------------------------------

TEST(ParHooi, SingleRankGridReproducesSequentialBitwise) {
    const DenseTensor x = testutil::random_tensor({6, 5, 4}, 201);
    DecomposeOptions opts;
    opts.epsilon = 0.5;
    opts.max_hooi_iters = 3;
    std::vector<double> seq_trace;
    const TuckerModel expected = tuckit::hooi(x, opts, &seq_trace);
    Simulator sim(ProcessGrid({1, 1, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        std::vector<double> trace;
        const DistTuckerModel model = tuckit::par_hooi(ctx, y, opts, &trace);
        EXPECT_EQ(model.ranks(), expected.ranks());
        ASSERT_EQ(trace.size(), seq_trace.size());
        for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(trace[i], seq_trace[i]);
        EXPECT_EQ(max_abs_diff_span(model.core.local.values(), expected.core.values()),
                  0.0);
    });
}

TEST(ParHooi, ZeroIterationsEqualsParSthosvd) {
    const DenseTensor x = testutil::random_tensor({8, 6, 5}, 211);
    DecomposeOptions opts;
    opts.epsilon = 0.4;
    opts.max_hooi_iters = 0;
    Simulator sim(ProcessGrid({2, 1, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistTuckerModel refined = tuckit::par_hooi(ctx, y, opts);
        DistTensor y2 = tuckit::distribute(ctx, x);
        const DistTuckerModel initial = tuckit::par_sthosvd(ctx, std::move(y2), opts);
        EXPECT_EQ(refined.ranks(), initial.ranks());
        EXPECT_EQ(max_abs_diff_span(refined.core.local.values(),
                                    initial.core.local.values()),
                  0.0);
    });
}

TEST(ParHooi, FitTraceIsNonIncreasing) {
    const DenseTensor x = testutil::random_tensor({10, 8, 6}, 221);
    DecomposeOptions opts;
    opts.epsilon = 0.5;
    opts.max_hooi_iters = 5;
    Simulator sim(ProcessGrid({2, 2, 1}));
    sim.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        std::vector<double> trace;
        tuckit::par_hooi(ctx, y, opts, &trace);
        if (ctx.rank() != 0) return;
        ASSERT_GE(trace.size(), 2u);
        const double slack = 1e-12 * x.norm_sq();
        for (std::size_t i = 1; i < trace.size(); ++i)
            EXPECT_LE(trace[i], trace[i - 1] + slack);
    });
}

TEST(ParHooi, ConcurrentModeAgreesWithSerialized) {
    const DenseTensor x = testutil::random_tensor({8, 6, 6}, 231);
    DecomposeOptions opts;
    opts.epsilon = 0.4;
    opts.max_hooi_iters = 2;

    std::vector<double> serialized_core, concurrent_core;
    Simulator a(ProcessGrid({2, 2, 1}), tuckit::ExecMode::serialized);
    a.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistTuckerModel model = tuckit::par_hooi(ctx, y, opts);
        const DenseTensor core = tuckit::gather(ctx, model.core);
        if (ctx.rank() == 0)
            serialized_core.assign(core.values().begin(), core.values().end());
    });
    Simulator b(ProcessGrid({2, 2, 1}), tuckit::ExecMode::concurrent);
    b.run([&](RankContext& ctx) {
        const DistTensor y = tuckit::distribute(ctx, x);
        const DistTuckerModel model = tuckit::par_hooi(ctx, y, opts);
        const DenseTensor core = tuckit::gather(ctx, model.core);
        if (ctx.rank() == 0)
            concurrent_core.assign(core.values().begin(), core.values().end());
    });
    ASSERT_FALSE(serialized_core.empty());
    EXPECT_EQ(serialized_core, concurrent_core);
    EXPECT_TRUE(a.ledger_snapshot() == b.ledger_snapshot());
}

}  // namespace
