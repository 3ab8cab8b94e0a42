#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <system_error>
#include <vector>

#include "dcppm/graph.hpp"
#include "dcppm/inference.hpp"
#include "dcppm/model.hpp"
#include "dcppm/parallel.hpp"
#include "dcppm/random.hpp"
#include "dcppm/stats.hpp"

namespace dcppm {

inline constexpr std::size_t kDenseLimit = 4000;

struct EigenCheck {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double theory1 = 0.0;
    double theory2 = 0.0;
    double cosine = 0.0;  // |cos| between the top eigenvector and the weight vector
};

/// Two largest-magnitude eigenvalues of E[A | sigma, phi] for sampled spins
/// and weights, against their large-n limits (a +- b)/2 * Phi2.
inline EigenCheck expected_matrix_eigencheck(std::size_t n, const ModelParams& params, Seed seed) {
    if (n < 2) throw std::invalid_argument("eigencheck needs n >= 2");
    if (n > kDenseLimit) throw std::length_error("eigencheck is limited to n <= 4000");
    Rng rng = make_rng(seed);
    const AtomSampler pick(params.law());
    std::vector<Spin> spin(n);
    Eigen::VectorXd phi(static_cast<Eigen::Index>(n));
    for (std::size_t v = 0; v < n; ++v) {
        spin[v] = random_spin(rng);
        phi(static_cast<Eigen::Index>(v)) = params.law().atoms()[pick(rng)].value;
    }

    const Eigen::Index dim = static_cast<Eigen::Index>(n);
    const double scale = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index u = 0; u < dim; ++u)
        for (Eigen::Index v = 0; v < dim; ++v)
            m(u, v) = u == v ? 0.0 : phi(u) * phi(v) * scale * (spin[u] == spin[v] ? params.a() : params.b());

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd& values = es.eigenvalues();
    Eigen::Index first = 0, second = -1;
    for (Eigen::Index i = 1; i < dim; ++i)
        if (std::abs(values(i)) > std::abs(values(first))) first = i;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (i != first && (second < 0 || std::abs(values(i)) > std::abs(values(second)))) second = i;

    EigenCheck out;
    out.lambda1 = values(first);
    out.lambda2 = values(second);
    out.theory1 = 0.5 * (params.a() + params.b()) * params.law().m2();
    out.theory2 = 0.5 * (params.a() - params.b()) * params.law().m2();
    out.cosine = std::abs(es.eigenvectors().col(first).dot(phi)) / phi.norm();
    return out;
}

struct GridPoint {
    double a = 0.0;
    double b = 0.0;
    std::size_t a_index = 0;
    std::size_t b_index = 0;
};

/// Grid points with a + b = sum and threshold statistic `stat` (a >= b).
inline GridPoint grid_point_from_stat(double stat, double sum, const WeightLaw& law, std::size_t index) {
    if (!(sum > 0.0) || !(stat >= 0.0)) throw std::invalid_argument("stat grid needs sum > 0 and stat >= 0");
    const double gap = std::sqrt(2.0 * sum * stat / law.m2());
    if (gap > sum) throw std::invalid_argument("statistic unreachable at this a + b");
    return {0.5 * (sum + gap), 0.5 * (sum - gap), index, 0};
}

struct SweepConfig {
    std::vector<GridPoint> grid;
    WeightLaw law = WeightLaw::point_mass(1.0);
    std::vector<std::size_t> n_values;
    std::size_t trials = 10;
    std::vector<SpectralOperator> estimators{SpectralOperator::nonbacktracking};
    Seed master_seed = 0;
    std::string output;  // CSV path; metadata goes to output + ".meta.json"
    std::size_t threads = 0;
};

struct SweepRow {
    double a = 0.0;
    double b = 0.0;
    double phi2 = 0.0;
    double stat = 0.0;
    std::size_t n = 0;
    SpectralOperator estimator = SpectralOperator::nonbacktracking;
    // Mean overlap and mean +- 1.96 sd of per-graph overlaps.
    double overlap_mean = 0.0;
    double overlap_lo = 0.0;
    double overlap_hi = 0.0;
    double giant_frac = 0.0;
    Seed seed = 0;
    std::size_t degenerate = 0;  // graphs where the estimator fell back to a random bisection
    std::string error;           // non-empty when the cell failed
};

inline Seed sweep_cell_seed(Seed master, const GridPoint& p, std::size_t n, SpectralOperator est) {
    return derive_seed(master, {p.a_index, p.b_index, n, static_cast<std::uint64_t>(est)});
}

inline SweepRow run_sweep_cell(const SweepConfig& config, const GridPoint& p, std::size_t n, SpectralOperator est) {
    SweepRow row;
    row.a = p.a;
    row.b = p.b;
    row.phi2 = config.law.m2();
    row.n = n;
    row.estimator = est;
    row.seed = sweep_cell_seed(config.master_seed, p, n, est);
    try {
        const ModelParams params(p.a, p.b, config.law);
        row.stat = ks_threshold_stat(params);
        if (config.trials < 2) throw std::invalid_argument("sweep needs at least two trials per cell");
        std::vector<double> overlaps, giant;
        for (std::size_t t = 0; t < config.trials; ++t) {
            const LabeledGraph g = sample_dcppm(n, params, derive_seed(row.seed, {t, 0}));
            const SpinEstimate est_spins = spectral_bisection(g, est, derive_seed(row.seed, {t, 1}));
            overlaps.push_back(overlap(g.spins(), est_spins));
            giant.push_back(largest_component_fraction(g));
            row.degenerate += est_spins.degenerate;
        }
        const MeanCI ov = mean_ci(overlaps);
        row.overlap_mean = ov.mean;
        row.overlap_lo = ov.mean - kZ95 * ov.sd;
        row.overlap_hi = ov.mean + kZ95 * ov.sd;
        row.giant_frac = mean_ci(giant).mean;
    } catch (const std::exception& e) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.overlap_mean = row.overlap_lo = row.overlap_hi = row.giant_frac = nan;
        if (row.stat == 0.0 && !(p.a + p.b > 0.0)) row.stat = nan;
        row.error = e.what();
    }
    return row;
}

/// One row per (grid point, n, estimator), in grid order.
inline std::vector<SweepRow> threshold_sweep(const SweepConfig& config) {
    struct Cell {
        GridPoint point;
        std::size_t n;
        SpectralOperator est;
    };
    std::vector<Cell> cells;
    for (const GridPoint& p : config.grid)
        for (std::size_t n : config.n_values)
            for (SpectralOperator est : config.estimators) cells.push_back({p, n, est});
    std::vector<SweepRow> rows(cells.size());
    parallel_for(
        cells.size(), [&](std::size_t i) { rows[i] = run_sweep_cell(config, cells[i].point, cells[i].n, cells[i].est); },
        config.threads);
    return rows;
}

inline constexpr const char* kSweepHeader = "a,b,phi2,stat,n,estimator,overlap_mean,overlap_lo,overlap_hi,giant_frac,seed";

namespace detail {

inline void put_number(std::ostream& os, double x) {
    if (std::isnan(x)) {
        os << "nan";
        return;
    }
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    os.write(buf, r.ptr - buf);
}

}  // namespace detail

inline void write_sweep_csv(std::ostream& os, std::span<const SweepRow> rows) {
    os << kSweepHeader << '\n';
    for (const SweepRow& r : rows) {
        for (double x : {r.a, r.b, r.phi2, r.stat}) detail::put_number(os, x), os << ',';
        os << r.n << ',' << operator_name(r.estimator) << ',';
        for (double x : {r.overlap_mean, r.overlap_lo, r.overlap_hi, r.giant_frac}) detail::put_number(os, x), os << ',';
        os << r.seed << '\n';
    }
}

}  // namespace dcppm
