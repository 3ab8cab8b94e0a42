#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dcppm/graph.hpp"
#include "dcppm/model.hpp"
#include "dcppm/parallel.hpp"
#include "dcppm/random.hpp"
#include "dcppm/stats.hpp"
#include "dcppm/tree.hpp"

namespace dcppm {

struct RootPosterior {
    double prob_plus = 0.5;
    double delta = 0.0;
};

inline RootPosterior make_posterior(double prob_plus) noexcept { return {prob_plus, std::abs(2.0 * prob_plus - 1.0)}; }

namespace detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(e^x + e^y), symmetric in its arguments.
inline double logaddexp(double x, double y) noexcept {
    if (x == kNegInf) return y;
    if (y == kNegInf) return x;
    const double hi = std::max(x, y), lo = std::min(x, y);
    return hi + std::log1p(std::exp(lo - hi));
}

// Streaming log-sum-exp.
struct LogSum {
    double max = kNegInf;
    double sum = 0.0;

    void add(double x) noexcept {
        if (x == kNegInf) return;
        if (x <= max) {
            sum += std::exp(x - max);
        } else {
            sum = sum * std::exp(max - x) + 1.0;
            max = x;
        }
    }
    void merge(const LogSum& o) noexcept {
        if (o.max == kNegInf) return;
        if (max == kNegInf) {
            *this = o;
            return;
        }
        if (o.max <= max) {
            sum += o.sum * std::exp(o.max - max);
        } else {
            sum = sum * std::exp(max - o.max) + o.sum;
            max = o.max;
        }
    }
    double value() const noexcept { return max == kNegInf ? kNegInf : max + std::log(sum); }
};

// P(+) from log-weights of the two root states.
inline double prob_from_logs(double log_plus, double log_minus) {
    if (log_plus == kNegInf && log_minus == kNegInf)
        throw std::domain_error("observations have zero likelihood under the model");
    if (log_minus == kNegInf) return 1.0;
    if (log_plus == kNegInf) return 0.0;
    return 1.0 / (1.0 + std::exp(log_minus - log_plus));
}

}  // namespace detail

/// Exact P(root = + | spins at depth m) under the broadcast channel with flip
/// probability epsilon, by upward message passing in the log domain.
inline RootPosterior tree_root_posterior(const LabeledTree& tree, int m, std::span<const Spin> observed,
                                         double epsilon) {
    if (m < 0) throw std::invalid_argument("boundary depth must be nonnegative");
    if (!(epsilon >= 0.0 && epsilon <= 0.5)) throw std::invalid_argument("epsilon must lie in [0, 1/2]");
    const NodeRange boundary = tree.generation(m);
    if (observed.size() != boundary.size())
        throw std::invalid_argument("observed spins must cover exactly the depth-m nodes");
    if (boundary.size() == 0) return make_posterior(0.5);

    const double log_keep = std::log(1.0 - epsilon);
    const double log_flip = epsilon == 0.0 ? detail::kNegInf : std::log(epsilon);

    // msg[i] = (log P(obs below i | i = +), log P(obs below i | i = -)), up to a shared constant.
    std::vector<std::pair<double, double>> msg(boundary.end, {0.0, 0.0});
    for (std::size_t i = boundary.begin; i < boundary.end; ++i) {
        const bool plus = observed[i - boundary.begin] == Spin::plus;
        msg[i] = plus ? std::pair{0.0, detail::kNegInf} : std::pair{detail::kNegInf, 0.0};
    }
    for (std::size_t i = boundary.end; i-- > 1;) {
        // All children of i have larger ids, so msg[i] is complete here.
        auto [lp, lm] = msg[i];
        const double shift = std::max(lp, lm);
        if (shift != detail::kNegInf) lp -= shift, lm -= shift;
        auto& up = msg[static_cast<std::size_t>(tree[i].parent)];
        up.first += detail::logaddexp(log_keep + lp, log_flip + lm);
        up.second += detail::logaddexp(log_flip + lp, log_keep + lm);
    }
    return make_posterior(detail::prob_from_logs(msg[0].first, msg[0].second));
}

struct DeltaEstimate {
    MeanCI delta;
    std::size_t extinct = 0;   // trees with an empty depth-m boundary
    std::size_t discarded = 0; // capped tree samples that were redrawn
};

struct MonteCarloOptions {
    std::size_t population_cap = kDefaultPopulationCap;
    std::size_t threads = 0;
};

/// E[Delta_m] over (tree, spins) drawn from the branching process with a
/// plain root.
inline DeltaEstimate estimate_expected_delta(const ModelParams& params, int m, std::size_t trials, Seed seed,
                                             const MonteCarloOptions& options = {}) {
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    if (m < 0) throw std::invalid_argument("boundary depth must be nonnegative");
    const double eps = params.a() + params.b() > 0.0 ? params.epsilon() : 0.5;
    const TpoiSampler sampler(params, options.population_cap);

    std::vector<double> deltas(trials);
    std::vector<std::size_t> discards(trials);
    std::vector<char> extinct(trials);
    parallel_for(
        trials,
        [&](std::size_t t) {
            const TreeSample s = sampler.sample(m, RootLaw::plain, derive_seed(seed, {t}));
            const std::vector<Spin> obs = s.tree.generation_spins(m);
            deltas[t] = tree_root_posterior(s.tree, m, obs, eps).delta;
            discards[t] = s.discarded;
            extinct[t] = obs.empty();
        },
        options.threads);

    DeltaEstimate out;
    out.delta = mean_ci(deltas);
    for (std::size_t t = 0; t < trials; ++t) {
        out.discarded += discards[t];
        out.extinct += extinct[t];
    }
    return out;
}

/// One factor of the graph likelihood given spins and weights: the edge
/// probability psi_u psi_v / N times a (agree) or b (disagree) if the edge is
/// present, one minus it otherwise.
inline double pairwise_factor(bool edge, bool agree, double psi_u, double psi_v, const ModelParams& params,
                              std::size_t population) {
    const double p = psi_u * psi_v / static_cast<double>(population) * (agree ? params.a() : params.b());
    if (p > 1.0) throw std::domain_error("edge probability exceeds 1");
    return edge ? p : 1.0 - p;
}

struct Anchor {
    VertexId vertex;
    Spin spin;
};

inline constexpr std::size_t kEnumerationLimit = 24;

/// Exact P(sigma_u = + | G, phi, anchors) by summing the likelihood over every
/// spin configuration that agrees with the anchors. `population` is the N in
/// the edge probabilities; 0 means the graph's own size.
inline RootPosterior graph_posterior_bruteforce(const LabeledGraph& graph, const ModelParams& params, VertexId u,
                                                std::span<const Anchor> anchors, std::size_t population = 0,
                                                std::size_t threads = 0) {
    const std::size_t n = graph.size();
    if (n > kEnumerationLimit) throw std::length_error("brute-force posterior is limited to 24 vertices");
    if (u >= n) throw std::out_of_range("vertex id out of range");
    if (population == 0) population = n;

    std::vector<int> fixed(n, 0);  // 0 free, +1 / -1 anchored
    for (const Anchor& an : anchors) {
        if (an.vertex >= n) throw std::out_of_range("anchor vertex out of range");
        const int s = spin_value(an.spin);
        if (fixed[an.vertex] != 0 && fixed[an.vertex] != s) throw std::invalid_argument("conflicting anchors");
        fixed[an.vertex] = s;
    }
    if (fixed[u] != 0) return make_posterior(fixed[u] > 0 ? 1.0 : 0.0);

    // Log factors for each pair in a fixed order, same-spin and cross-spin.
    std::vector<double> log_same, log_cross;
    log_same.reserve(n * (n - 1) / 2);
    log_cross.reserve(n * (n - 1) / 2);
    for (VertexId i = 0; i < n; ++i)
        for (VertexId j = i + 1; j < n; ++j) {
            const bool e = graph.has_edge(i, j);
            const double wi = graph.weight(i), wj = graph.weight(j);
            log_same.push_back(std::log(pairwise_factor(e, true, wi, wj, params, population)));
            log_cross.push_back(std::log(pairwise_factor(e, false, wi, wj, params, population)));
        }

    std::vector<VertexId> free_vertices;
    for (VertexId v = 0; v < n; ++v)
        if (fixed[v] == 0) free_vertices.push_back(v);
    const std::size_t bits = free_vertices.size();
    const std::uint64_t configs = std::uint64_t{1} << bits;
    const std::uint64_t block = std::min<std::uint64_t>(configs, 4096);
    const std::size_t blocks = static_cast<std::size_t>((configs + block - 1) / block);

    std::vector<detail::LogSum> plus(blocks), minus(blocks);
    parallel_for(
        blocks,
        [&](std::size_t bi) {
            std::vector<int> spin(fixed);
            const std::uint64_t lo = bi * block, hi = std::min(configs, lo + block);
            for (std::uint64_t c = lo; c < hi; ++c) {
                for (std::size_t k = 0; k < bits; ++k) spin[free_vertices[k]] = (c >> k) & 1 ? 1 : -1;
                double ll = 0.0;
                std::size_t p = 0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = i + 1; j < n; ++j, ++p) ll += spin[i] == spin[j] ? log_same[p] : log_cross[p];
                (spin[u] > 0 ? plus[bi] : minus[bi]).add(ll);
            }
        },
        threads);

    detail::LogSum zp, zm;
    for (std::size_t bi = 0; bi < blocks; ++bi) {
        zp.merge(plus[bi]);
        zm.merge(minus[bi]);
    }
    return make_posterior(detail::prob_from_logs(zp.value(), zm.value()));
}

inline RootPosterior graph_posterior_bruteforce(const LabeledGraph& graph, const ModelParams& params, VertexId u,
                                                std::optional<Anchor> anchor = std::nullopt,
                                                std::size_t population = 0) {
    if (anchor) return graph_posterior_bruteforce(graph, params, u, std::span<const Anchor>(&*anchor, 1), population);
    return graph_posterior_bruteforce(graph, params, u, std::span<const Anchor>{}, population);
}

struct SpinEstimate {
    std::vector<Spin> assignment;
    bool bisection = true;
    bool degenerate = false;  // spectrum gave no usable second direction; assignment is a random bisection
};

enum class SpectralOperator { adjacency, nonbacktracking };

inline const char* operator_name(SpectralOperator op) {
    return op == SpectralOperator::adjacency ? "adjacency" : "nonbacktracking";
}

inline SpectralOperator operator_from_name(const std::string& name) {
    if (name == "adjacency") return SpectralOperator::adjacency;
    if (name == "nonbacktracking") return SpectralOperator::nonbacktracking;
    throw std::invalid_argument("unknown spectral operator: " + name);
}

struct SpectralOptions {
    int block_size = 8;
    int max_iterations = 2000;
    double tolerance = 1e-8;
};

namespace detail {

// Top floor(n/2) scores get +; ties broken by a seeded random key.
inline std::vector<Spin> bisect_by_score(std::span<const double> score, Rng& rng) {
    const std::size_t n = score.size();
    std::vector<std::uint64_t> key(n);
    for (auto& k : key) k = rng();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        if (score[i] != score[j]) return score[i] > score[j];
        return key[i] < key[j];
    });
    std::vector<Spin> out(n, Spin::minus);
    for (std::size_t r = 0; r < n / 2; ++r) out[order[r]] = Spin::plus;
    return out;
}

inline void apply_operator(const LabeledGraph& g, SpectralOperator op, const Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    const Eigen::Index n = static_cast<Eigen::Index>(g.size());
    y.setZero(x.rows(), x.cols());
    for (Eigen::Index v = 0; v < n; ++v)
        for (VertexId w : g.neighbors(static_cast<VertexId>(v))) y.row(v) += x.row(w);
    if (op == SpectralOperator::nonbacktracking) {
        // [[A, I - D], [I, 0]]
        for (Eigen::Index v = 0; v < n; ++v) {
            const double d = static_cast<double>(g.degree(static_cast<VertexId>(v)));
            y.row(v) += (1.0 - d) * x.row(n + v);
            y.row(n + v) = x.row(v);
        }
    }
}

}  // namespace detail

/// Exact bisection from the second leading eigenvector of the adjacency or
/// 2n x 2n non-backtracking (Ihara) operator, found by block power iteration
/// with Rayleigh-Ritz extraction.
inline SpinEstimate spectral_bisection(const LabeledGraph& graph, SpectralOperator op, Seed seed,
                                       const SpectralOptions& options = {}) {
    const std::size_t n = graph.size();
    if (n < 2) throw std::invalid_argument("spectral bisection needs at least two vertices");
    Rng rng = make_rng(seed);
    Rng tie_rng = make_rng(derive_seed(seed, {1}));

    auto random_bisection = [&] {
        std::vector<double> zero(n, 0.0);
        return SpinEstimate{detail::bisect_by_score(zero, tie_rng), true, true};
    };
    if (graph.edge_count() == 0) return random_bisection();

    const Eigen::Index dim = static_cast<Eigen::Index>(op == SpectralOperator::adjacency ? n : 2 * n);
    const Eigen::Index k = std::min<Eigen::Index>(options.block_size, dim);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd q(dim, k), z;
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < k; ++j) q(i, j) = normal(rng);
    auto orthonormalize = [&](const Eigen::MatrixXd& m) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
        return Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    };
    q = orthonormalize(q);

    // Ritz pairs sorted by descending real part among (numerically) real ones.
    std::vector<std::pair<double, Eigen::VectorXd>> ritz;
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (int it = 1; it <= options.max_iterations; ++it) {
        detail::apply_operator(graph, op, q, z);
        const bool check = it % 10 == 0 || it == options.max_iterations;
        if (check) {
            const Eigen::MatrixXd h = q.transpose() * z;
            ritz.clear();
            if (op == SpectralOperator::adjacency) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (h + h.transpose()));
                for (Eigen::Index j = 0; j < k; ++j) ritz.push_back({es.eigenvalues()(j), q * es.eigenvectors().col(j)});
            } else {
                Eigen::EigenSolver<Eigen::MatrixXd> es(h);
                const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
                for (Eigen::Index j = 0; j < k; ++j) {
                    const auto lam = es.eigenvalues()(j);
                    if (std::abs(lam.imag()) > 1e-9 * std::max(1.0, scale)) continue;
                    ritz.push_back({lam.real(), q * es.eigenvectors().col(j).real()});
                }
            }
            std::sort(ritz.begin(), ritz.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
            if (ritz.size() >= 2) {
                const double lam2 = ritz[1].first;
                if (std::abs(lam2 - previous) <= options.tolerance * std::max(1.0, std::abs(lam2))) break;
                previous = lam2;
            }
        }
        q = orthonormalize(z);
    }
    if (ritz.size() < 2) return random_bisection();

    const double lam1 = ritz[0].first, lam2 = ritz[1].first;
    const double scale = std::max(1.0, std::abs(lam1));
    if (std::abs(lam2) <= 1e-9 * scale) return random_bisection();

    Eigen::VectorXd x1 = ritz[0].second.head(static_cast<Eigen::Index>(n));
    Eigen::VectorXd x2 = ritz[1].second.head(static_cast<Eigen::Index>(n));
    Eigen::VectorXd score = x2;
    if (std::abs(lam1 - lam2) <= 1e-6 * scale) {
        // Repeated leading eigenvalue: use the zero-sum direction of the pair.
        const double s1 = x1.sum(), s2 = x2.sum();
        if (std::abs(s1) + std::abs(s2) > 1e-12) score = s2 * x1 - s1 * x2;
    }
    if (score.norm() <= 1e-12) return random_bisection();
    std::vector<double> values(score.data(), score.data() + score.size());
    return SpinEstimate{detail::bisect_by_score(values, tie_rng), true, false};
}

/// Agreement fraction maximized over the global flip.
inline double overlap(std::span<const Spin> truth, std::span<const Spin> estimate) {
    if (truth.size() != estimate.size()) throw std::invalid_argument("overlap needs equal lengths");
    if (truth.empty()) throw std::invalid_argument("overlap of empty assignments");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) agree += truth[i] == estimate[i];
    const std::size_t best = std::max(agree, truth.size() - agree);
    return static_cast<double>(best) / static_cast<double>(truth.size());
}

inline double overlap(std::span<const Spin> truth, const SpinEstimate& estimate) {
    return overlap(truth, std::span<const Spin>(estimate.assignment));
}

/// Monte Carlo estimate of P(sigma_u = sigma_v) over uniform pairs u != v
/// with both estimated spins equal to +.
inline double pair_agreement_given_estimate(std::span<const Spin> truth, std::span<const Spin> estimate,
                                            std::size_t trials, Seed seed) {
    if (truth.size() != estimate.size()) throw std::invalid_argument("pair agreement needs equal lengths");
    if (trials < 1) throw std::invalid_argument("need at least one trial");
    std::vector<std::size_t> plus;
    for (std::size_t i = 0; i < estimate.size(); ++i)
        if (estimate[i] == Spin::plus) plus.push_back(i);
    if (plus.size() < 2) throw std::invalid_argument("need at least two + estimates");
    Rng rng = make_rng(seed);
    std::uniform_int_distribution<std::size_t> first(0, plus.size() - 1), second(0, plus.size() - 2);
    std::size_t same = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t i = first(rng);
        std::size_t j = second(rng);
        if (j >= i) ++j;
        same += truth[plus[i]] == truth[plus[j]];
    }
    return static_cast<double>(same) / static_cast<double>(trials);
}

inline double pair_agreement_given_estimate(std::span<const Spin> truth, const SpinEstimate& estimate,
                                            std::size_t trials, Seed seed) {
    return pair_agreement_given_estimate(truth, std::span<const Spin>(estimate.assignment), trials, seed);
}

}  // namespace dcppm
