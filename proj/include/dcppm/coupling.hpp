#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcppm/graph.hpp"
#include "dcppm/model.hpp"
#include "dcppm/parallel.hpp"
#include "dcppm/random.hpp"
#include "dcppm/stats.hpp"
#include "dcppm/tree.hpp"

namespace dcppm {

/// Law of an unexplored vertex after m vertices of types x_1..x_m have been
/// explored and found not adjacent to it: mu reweighted by
/// g(y) = prod_i (1 - kappa(x_i, y) / n).
class ReservoirLaw {
public:
    ReservoirLaw(ModelParams params, std::vector<SignedType> explored, std::size_t n)
        : params_(std::move(params)), explored_(std::move(explored)), n_(n), base_(base_type_law(params_.law())),
          law_(base_) {
        if (n_ < 1) throw std::invalid_argument("population size must be at least 1");
        const double scale = static_cast<double>(n_);
        std::vector<TypeAtom> masses;
        masses.reserve(base_.size());
        for (const TypeAtom& y : base_.atoms()) {
            double log_g = 0.0;
            for (const SignedType& x : explored_) {
                const double r = kernel(x, y.type, params_) / scale;
                if (!(r < 1.0)) throw std::domain_error("kappa(x_i, y) / n must be below 1");
                log_g += std::log1p(-r);
            }
            masses.push_back({y.type, std::exp(log_g) * y.prob});
        }
        law_ = TypeLaw::from_masses(std::move(masses));
    }

    const ModelParams& params() const noexcept { return params_; }
    std::span<const SignedType> explored() const noexcept { return explored_; }
    std::size_t population() const noexcept { return n_; }
    const TypeLaw& base() const noexcept { return base_; }
    const TypeLaw& law() const noexcept { return law_; }

    double tv_to_base() const { return total_variation(law_, base_); }

private:
    ModelParams params_;
    std::vector<SignedType> explored_;
    std::size_t n_;
    TypeLaw base_;
    TypeLaw law_;
};

inline ReservoirLaw reservoir_law(std::span<const SignedType> explored, std::size_t n, const ModelParams& params) {
    return ReservoirLaw(params, std::vector<SignedType>(explored.begin(), explored.end()), n);
}

/// Law of the types of x's neighbours among the unexplored vertices, next to
/// the idealised offspring law it approximates.
struct NeighbourLaw {
    TypeLaw law;
    TypeLaw offspring;

    double tv_to_offspring() const { return total_variation(law, offspring); }
};

inline NeighbourLaw neighbour_type_law(const SignedType& x, const ReservoirLaw& reservoir) {
    const ModelParams& params = reservoir.params();
    std::vector<TypeAtom> masses;
    for (const TypeAtom& y : reservoir.law().atoms()) masses.push_back({y.type, kernel(x, y.type, params) * y.prob});
    return {TypeLaw::from_masses(std::move(masses)), offspring_type_law(x, params)};
}

inline double reservoir_tv_bound(const ModelParams& params, std::size_t m, std::size_t n) {
    return 2.0 * params.kappa_max() * static_cast<double>(m) / static_cast<double>(n);
}

/// 4 kappa_max^3 / kappa_min^2 * m / n; infinite when kappa_min = 0.
inline double neighbour_tv_bound(const ModelParams& params, std::size_t m, std::size_t n) {
    const double kmin = params.kappa_min();
    if (kmin == 0.0) return std::numeric_limits<double>::infinity();
    const double kmax = params.kappa_max();
    return 4.0 * kmax * kmax * kmax / (kmin * kmin) * static_cast<double>(m) / static_cast<double>(n);
}

namespace detail {

inline double log_binomial_pmf(std::uint64_t trials, double p, std::uint64_t k) {
    const double n = static_cast<double>(trials);
    const double x = static_cast<double>(k);
    double lp = std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0);
    if (k > 0) lp += x * std::log(p);
    if (k < trials) lp += (n - x) * std::log1p(-p);
    return lp;
}

inline double log_poisson_pmf(double mean, std::uint64_t k) {
    const double x = static_cast<double>(k);
    if (mean == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return x * std::log(mean) - mean - std::lgamma(x + 1.0);
}

inline std::uint64_t poisson_support_end(double mean) {
    return static_cast<std::uint64_t>(mean + 40.0 * std::sqrt(mean) + 60.0);
}

}  // namespace detail

/// Exact TV(Binomial(trials, p), Poisson(trials * p)).
inline double binomial_poisson_tv(std::uint64_t trials, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
    const double mean = static_cast<double>(trials) * p;
    if (p == 0.0 || trials == 0) return 0.0;
    const std::uint64_t end = std::max(std::min(trials, detail::poisson_support_end(mean)), std::uint64_t{1});
    double l1 = 0.0, mass_b = 0.0, mass_p = 0.0;
    for (std::uint64_t k = 0; k <= end; ++k) {
        const double b = k <= trials ? std::exp(detail::log_binomial_pmf(trials, p, k)) : 0.0;
        const double q = std::exp(detail::log_poisson_pmf(mean, k));
        l1 += std::abs(b - q);
        mass_b += b;
        mass_p += q;
    }
    l1 += std::max(0.0, 1.0 - mass_b) + std::max(0.0, 1.0 - mass_p);
    return 0.5 * l1;
}

/// Exact TV(Poisson(mu), Poisson(lambda)).
inline double poisson_poisson_tv(double mu, double lambda) {
    if (mu < 0.0 || lambda < 0.0) throw std::invalid_argument("Poisson means must be nonnegative");
    if (mu == lambda) return 0.0;
    const std::uint64_t end = detail::poisson_support_end(std::max(mu, lambda));
    double l1 = 0.0, mass_x = 0.0, mass_y = 0.0;
    for (std::uint64_t k = 0; k <= end; ++k) {
        const double x = std::exp(detail::log_poisson_pmf(mu, k));
        const double y = std::exp(detail::log_poisson_pmf(lambda, k));
        l1 += std::abs(x - y);
        mass_x += x;
        mass_y += y;
    }
    l1 += std::max(0.0, 1.0 - mass_x) + std::max(0.0, 1.0 - mass_y);
    return 0.5 * l1;
}

/// Largest constant C with certified coupling at radius C log n.
inline double coupling_constant(const ModelParams& params) {
    const double two_kmax = 2.0 * params.kappa_max();
    if (!(two_kmax > 1.0)) throw std::domain_error("coupling radius needs 2 * kappa_max > 1");
    return (1.0 - std::log(4.0 / std::exp(1.0))) / (3.0 * std::log(two_kmax));
}

/// floor(safety * C_max * log n).
inline int coupling_radius(std::size_t n, const ModelParams& params, double safety = 1.0) {
    if (n < 2) throw std::invalid_argument("coupling radius needs n >= 2");
    if (!(safety > 0.0 && safety <= 1.0)) throw std::invalid_argument("safety must lie in (0, 1]");
    const double r = safety * coupling_constant(params) * std::log(static_cast<double>(n));
    return std::max(0, static_cast<int>(std::floor(r)));
}

enum class CouplingStatistic {
    root_degree,
    degree_and_same_spin,  // joint (root degree, children sharing the root's spin)
    generation_sizes,      // joint sizes of generations 1 and 2 (needs radius >= 2)
    child_weight_atoms,    // pooled weight-atom histogram of depth-1 nodes
};

inline const char* statistic_name(CouplingStatistic s) {
    switch (s) {
        case CouplingStatistic::root_degree: return "root_degree";
        case CouplingStatistic::degree_and_same_spin: return "degree_and_same_spin";
        case CouplingStatistic::generation_sizes: return "generation_sizes";
        case CouplingStatistic::child_weight_atoms: return "child_weight_atoms";
    }
    return "unknown";
}

inline CouplingStatistic statistic_from_name(const std::string& name) {
    for (auto s : {CouplingStatistic::root_degree, CouplingStatistic::degree_and_same_spin,
                   CouplingStatistic::generation_sizes, CouplingStatistic::child_weight_atoms})
        if (name == statistic_name(s)) return s;
    throw std::invalid_argument("unknown coupling statistic: " + name);
}

inline std::vector<CouplingStatistic> all_coupling_statistics() {
    return {CouplingStatistic::root_degree, CouplingStatistic::degree_and_same_spin,
            CouplingStatistic::generation_sizes, CouplingStatistic::child_weight_atoms};
}

struct StatisticTv {
    CouplingStatistic statistic = CouplingStatistic::root_degree;
    bool applicable = true;
    TvEstimate estimate;
};

struct CouplingReport {
    std::size_t n = 0;
    int radius = 0;
    std::size_t trials = 0;
    Seed seed = 0;
    std::optional<int> certified_radius;
    std::vector<StatisticTv> statistics;
    double truncated_fraction = 0.0;
    double truncated_lo = 0.0;  // Wilson 95% interval
    double truncated_hi = 0.0;
    std::size_t growth_violations = 0;  // neighbourhoods breaking |dG_s| <= (2 kappa_max)^s log n
    std::size_t tree_discards = 0;
    std::vector<std::string> warnings;

    const StatisticTv* find(CouplingStatistic s) const {
        for (const auto& st : statistics)
            if (st.statistic == s) return &st;
        return nullptr;
    }
};

struct CouplingOptions {
    std::size_t bootstrap_resamples = 1000;
    std::size_t population_cap = kDefaultPopulationCap;
    std::size_t threads = 0;  // 0: hardware concurrency
};

namespace detail {

struct LocalSummary {
    std::int64_t degree = 0;
    std::int64_t same = 0;
    std::int64_t gen1 = 0;
    std::int64_t gen2 = 0;
    std::vector<std::int64_t> child_atoms;
};

inline LocalSummary summarize(const LabeledTree& tree, const WeightLaw& law) {
    LocalSummary s;
    const NodeRange g1 = tree.generation(1);
    s.degree = static_cast<std::int64_t>(g1.size());
    s.gen1 = s.degree;
    s.gen2 = static_cast<std::int64_t>(tree.generation_size(2));
    for (std::size_t i = g1.begin; i < g1.end; ++i) {
        if (tree[i].spin == tree.root().spin) ++s.same;
        s.child_atoms.push_back(static_cast<std::int64_t>(law.index_of(tree[i].weight)));
    }
    return s;
}

inline std::pair<double, double> wilson_interval(double successes, double trials, double z = kZ95) {
    if (trials == 0.0) return {0.0, 1.0};
    const double p = successes / trials;
    const double z2 = z * z;
    const double centre = (p + z2 / (2.0 * trials)) / (1.0 + z2 / trials);
    const double half = z * std::sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / (1.0 + z2 / trials);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace detail

/// Compares `trials` graph neighbourhoods (fresh graph, uniform root per
/// trial) against `trials` independent trees with a plain root, on each
/// selected discrete statistic.
inline CouplingReport coupling_experiment(std::size_t n, const ModelParams& params, int radius, std::size_t trials,
                                          Seed seed, std::span<const CouplingStatistic> statistics,
                                          const CouplingOptions& options = {}) {
    if (trials < 1) throw std::invalid_argument("coupling experiment needs at least one trial");
    if (radius < 0) throw std::invalid_argument("radius must be nonnegative");

    CouplingReport report;
    report.n = n;
    report.radius = radius;
    report.trials = trials;
    report.seed = seed;
    try {
        report.certified_radius = coupling_radius(n, params, 1.0);
        if (radius > *report.certified_radius)
            report.warnings.push_back("radius " + std::to_string(radius) + " exceeds the certified radius " +
                                      std::to_string(*report.certified_radius) + "; coupling is not guaranteed");
    } catch (const std::exception& e) {
        report.warnings.push_back(std::string("no certified radius: ") + e.what());
    }

    const WeightLaw& law = params.law();
    const TpoiSampler trees(params, options.population_cap);
    const double growth_base = 2.0 * params.kappa_max();
    const double log_n = std::log(static_cast<double>(n));

    std::vector<detail::LocalSummary> graph_side(trials), tree_side(trials);
    std::vector<char> truncated(trials, 0), growth_bad(trials, 0);
    std::vector<std::size_t> discards(trials, 0);

    parallel_for(
        trials,
        [&](std::size_t t) {
            Rng rng = make_rng(derive_seed(seed, {0, t}));
            const LabeledGraph g = sample_dcppm(n, params, rng);
            std::uniform_int_distribution<VertexId> pick_root(0, static_cast<VertexId>(n - 1));
            const LabeledNeighborhood ball = neighborhood(g, pick_root(rng), radius);
            graph_side[t] = detail::summarize(ball.tree, law);
            truncated[t] = ball.truncated;
            for (int s = 1; s <= radius; ++s) {
                const double bound = std::pow(growth_base, s) * log_n;
                if (static_cast<double>(ball.tree.generation_size(s)) > bound) growth_bad[t] = 1;
            }

            TreeSample tree = trees.sample(radius, RootLaw::plain, derive_seed(seed, {1, t}));
            tree_side[t] = detail::summarize(tree.tree, law);
            discards[t] = tree.discarded;
        },
        options.threads);

    for (std::size_t t = 0; t < trials; ++t) {
        report.truncated_fraction += truncated[t];
        report.growth_violations += growth_bad[t];
        report.tree_discards += discards[t];
    }
    const auto [lo, hi] = detail::wilson_interval(report.truncated_fraction, static_cast<double>(trials));
    report.truncated_fraction /= static_cast<double>(trials);
    report.truncated_lo = lo;
    report.truncated_hi = hi;
    if (report.tree_discards > 0)
        report.warnings.push_back(std::to_string(report.tree_discards) +
                                  " tree samples exceeded the population cap and were resampled");

    Rng boot = make_rng(derive_seed(seed, {2}));
    for (CouplingStatistic stat : statistics) {
        StatisticTv out;
        out.statistic = stat;
        if (stat == CouplingStatistic::generation_sizes && radius < 2) {
            out.applicable = false;
            report.statistics.push_back(out);
            continue;
        }
        KeyedSample gx, tx;
        auto add = [stat](KeyedSample& sample, const detail::LocalSummary& s) {
            switch (stat) {
                case CouplingStatistic::root_degree: sample.add_trial(s.degree); break;
                case CouplingStatistic::degree_and_same_spin: sample.add_trial((s.degree << 24) | s.same); break;
                case CouplingStatistic::generation_sizes: sample.add_trial((s.gen1 << 32) | s.gen2); break;
                case CouplingStatistic::child_weight_atoms: sample.add_trial(s.child_atoms); break;
            }
        };
        for (std::size_t t = 0; t < trials; ++t) {
            add(gx, graph_side[t]);
            add(tx, tree_side[t]);
        }
        out.estimate = bootstrap_tv(gx, tx, options.bootstrap_resamples, boot);
        report.statistics.push_back(out);
    }
    return report;
}

}  // namespace dcppm
