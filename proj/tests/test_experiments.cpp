#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcppm/experiments.hpp"

using namespace dcppm;

namespace {

SweepConfig small_config(std::vector<GridPoint> grid, std::vector<std::size_t> n, std::size_t trials, Seed seed) {
    SweepConfig c;
    c.grid = std::move(grid);
    c.n_values = std::move(n);
    c.trials = trials;
    c.master_seed = seed;
    return c;
}

std::string csv_of(std::span<const SweepRow> rows) {
    std::ostringstream os;
    write_sweep_csv(os, rows);
    return os.str();
}

}  // namespace

TEST(Eigencheck, EqualRatesRankOne) {
    const std::size_t n = 600;
    const EigenCheck e = expected_matrix_eigencheck(n, ModelParams(3.0, 3.0, WeightLaw::point_mass(1.0)), 1);
    EXPECT_EQ(e.theory1, 3.0);
    EXPECT_EQ(e.theory2, 0.0);
    // 3/n * (J - I): eigenvalues 3(n-1)/n and -3/n.
    EXPECT_NEAR(e.lambda1, 3.0 * (n - 1) / n, 1e-10);
    EXPECT_NEAR(e.lambda2, -3.0 / n, 1e-10);
    EXPECT_LT(std::abs(e.lambda2), 1.0 / std::sqrt(double(n)));
    EXPECT_NEAR(e.cosine, 1.0, 1e-10);
}

TEST(Eigencheck, TwoPointWeights) {
    const EigenCheck e =
        expected_matrix_eigencheck(1000, ModelParams(4.0, 1.0, make_weight_law({{1.0, 0.5}, {2.0, 0.5}})), 5);
    EXPECT_NEAR(e.theory1, 6.25, 1e-12);
    EXPECT_NEAR(e.theory2, 3.75, 1e-12);
    EXPECT_NEAR(e.lambda1, 6.25, 0.1 * 6.25);
    EXPECT_NEAR(e.lambda2, 3.75, 0.1 * 3.75);
    EXPECT_GT(e.cosine, 0.98);
}

TEST(Eigencheck, SizeLimits) {
    const ModelParams p(3.0, 1.0, WeightLaw::point_mass(1.0));
    EXPECT_THROW(expected_matrix_eigencheck(kDenseLimit + 1, p, 1), std::length_error);
    EXPECT_THROW(expected_matrix_eigencheck(1, p, 1), std::invalid_argument);
}

TEST(GridPoint, FromStatistic) {
    const WeightLaw one = WeightLaw::point_mass(1.0);
    const GridPoint g = grid_point_from_stat(4.0 / 3.0, 6.0, one, 3);
    EXPECT_NEAR(g.a, 5.0, 1e-12);
    EXPECT_NEAR(g.b, 1.0, 1e-12);
    EXPECT_EQ(g.a_index, 3u);
    const WeightLaw two = make_weight_law({{1.0, 0.5}, {2.0, 0.5}});
    for (double stat : {0.0, 0.1, 0.5, 0.9, 1.5}) {
        const GridPoint q = grid_point_from_stat(stat, 5.0, two, 0);
        EXPECT_NEAR(q.a + q.b, 5.0, 1e-12);
        EXPECT_NEAR(ks_threshold_stat(ModelParams(q.a, q.b, two)), stat, 1e-12);
    }
    EXPECT_THROW(grid_point_from_stat(100.0, 2.0, one, 0), std::invalid_argument);
    EXPECT_THROW(grid_point_from_stat(0.5, 0.0, one, 0), std::invalid_argument);
}

TEST(Sweep, EqualRatesContainHalf) {
    // Flip-maximized overlaps sit above 1/2, so the interval needs enough
    // graphs for a stable spread.
    const SweepConfig c = small_config({{2.0, 2.0, 0, 0}, {4.0, 4.0, 1, 1}}, {400}, 40, 77);
    const auto rows = threshold_sweep(c);
    ASSERT_EQ(rows.size(), 2u);
    for (const SweepRow& r : rows) {
        EXPECT_TRUE(r.error.empty()) << r.error;
        EXPECT_LE(r.overlap_lo, 0.5);
        EXPECT_GE(r.overlap_hi, 0.5);
        EXPECT_GE(r.overlap_mean, 0.5);
        EXPECT_EQ(r.stat, 0.0);
    }
}

TEST(Sweep, RowsRecomputeStatistic) {
    SweepConfig c = small_config({{3.0, 1.0, 0, 0}, {5.0, 1.0, 1, 0}, {1.0, 4.0, 2, 1}}, {300}, 2, 1);
    c.law = make_weight_law({{1.0, 0.3}, {2.0, 0.7}});
    c.estimators = {SpectralOperator::adjacency, SpectralOperator::nonbacktracking};
    const auto rows = threshold_sweep(c);
    ASSERT_EQ(rows.size(), 6u);
    for (const SweepRow& r : rows) {
        EXPECT_NEAR(r.stat, ks_threshold_stat(ModelParams(r.a, r.b, c.law)), 1e-12);
        EXPECT_EQ(r.phi2, c.law.m2());
        EXPECT_GE(r.overlap_mean, 0.5);
        EXPECT_LE(r.overlap_mean, 1.0);
        EXPECT_LE(r.overlap_lo, r.overlap_mean);
    }
    EXPECT_EQ(rows[0].estimator, SpectralOperator::adjacency);
    EXPECT_EQ(rows[1].estimator, SpectralOperator::nonbacktracking);
}

TEST(Sweep, ByteIdenticalAcrossRunsAndThreads) {
    SweepConfig c = small_config({{3.0, 1.0, 0, 0}, {2.0, 2.0, 1, 1}}, {300, 600}, 3, 2024);
    c.threads = 1;
    const std::string first = csv_of(threshold_sweep(c));
    c.threads = 4;
    const std::string second = csv_of(threshold_sweep(c));
    EXPECT_EQ(first, second);
    c.master_seed = 2025;
    EXPECT_NE(first, csv_of(threshold_sweep(c)));
}

TEST(Sweep, CellSeedsIndependentOfGridShape) {
    const SweepConfig wide = small_config({{3.0, 1.0, 0, 0}, {2.0, 2.0, 1, 1}}, {300}, 2, 9);
    const SweepConfig narrow = small_config({{2.0, 2.0, 1, 1}}, {300}, 2, 9);
    const auto a = threshold_sweep(wide), b = threshold_sweep(narrow);
    EXPECT_EQ(a[1].seed, b[0].seed);
    EXPECT_EQ(a[1].overlap_mean, b[0].overlap_mean);
}

TEST(Sweep, FailedCellRecordedAndRunContinues) {
    const SweepConfig c = small_config({{500.0, 1.0, 0, 0}, {3.0, 1.0, 1, 0}}, {100}, 2, 3);
    const auto rows = threshold_sweep(c);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_FALSE(rows[0].error.empty());
    EXPECT_TRUE(std::isnan(rows[0].overlap_mean));
    EXPECT_TRUE(std::isnan(rows[0].giant_frac));
    EXPECT_TRUE(rows[1].error.empty());
    EXPECT_FALSE(std::isnan(rows[1].overlap_mean));
    const std::string csv = csv_of(rows);
    EXPECT_NE(csv.find(",nan,nan,nan,nan,"), std::string::npos);

    const SweepConfig one_trial = small_config({{3.0, 1.0, 0, 0}}, {100}, 1, 3);
    EXPECT_FALSE(threshold_sweep(one_trial)[0].error.empty());
}

TEST(Sweep, GiantComponentEmergesAtUnitMeanDegree) {
    // a = b = c gives offspring mean c.
    std::vector<GridPoint> grid;
    const std::vector<double> cs{0.5, 0.7, 1.5, 2.0};
    for (std::size_t i = 0; i < cs.size(); ++i) grid.push_back({cs[i], cs[i], i, i});
    const auto rows = threshold_sweep(small_config(grid, {4000}, 4, 11));
    for (const SweepRow& r : rows) {
        if (r.a < 1.0) {
            EXPECT_LT(r.giant_frac, 0.1) << r.a;
        } else {
            EXPECT_GT(r.giant_frac, 0.1) << r.a;
        }
    }
}

TEST(Sweep, CsvLayout) {
    SweepRow r;
    r.a = 3;
    r.b = 1;
    r.phi2 = 1;
    r.stat = 0.5;
    r.n = 100;
    r.overlap_mean = 0.625;
    r.overlap_lo = 0.5;
    r.overlap_hi = 0.75;
    r.giant_frac = 0.9;
    r.seed = 42;
    const std::vector<SweepRow> rows{r};
    EXPECT_EQ(csv_of(rows), std::string(kSweepHeader) + "\n3,1,1,0.5,100,nonbacktracking,0.625,0.5,0.75,0.9,42\n");
}
