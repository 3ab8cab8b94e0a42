#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dcppm/model.hpp"
#include "dcppm/random.hpp"
#include "dcppm/tree.hpp"

namespace dcppm {

using VertexId = std::uint32_t;
using Edge = std::pair<VertexId, VertexId>;

/// Simple undirected graph with a spin and a weight per vertex, stored as
/// sorted adjacency lists (CSR).
class LabeledGraph {
public:
    LabeledGraph(std::vector<Spin> spins, std::vector<double> weights, std::span<const Edge> edges)
        : spins_(std::move(spins)), weights_(std::move(weights)) {
        const std::size_t n = spins_.size();
        if (weights_.size() != n) throw std::invalid_argument("spins and weights must have the same length");
        for (double w : weights_)
            if (!std::isfinite(w) || w <= 0.0) throw std::invalid_argument("vertex weights must be positive");

        std::vector<std::size_t> degree(n, 0);
        for (const auto& [u, v] : edges) {
            if (u >= n || v >= n) throw std::out_of_range("edge endpoint out of range");
            if (u == v) throw std::invalid_argument("self-loops are not allowed");
            ++degree[u];
            ++degree[v];
        }
        offsets_.assign(n + 1, 0);
        for (std::size_t v = 0; v < n; ++v) offsets_[v + 1] = offsets_[v] + degree[v];
        targets_.resize(offsets_[n]);
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (const auto& [u, v] : edges) {
            targets_[fill[u]++] = v;
            targets_[fill[v]++] = u;
        }
        for (std::size_t v = 0; v < n; ++v) {
            auto first = targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]);
            auto last = targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]);
            std::sort(first, last);
            if (std::adjacent_find(first, last) != last) throw std::invalid_argument("multi-edges are not allowed");
        }
    }

    std::size_t size() const noexcept { return spins_.size(); }
    std::size_t edge_count() const noexcept { return targets_.size() / 2; }
    std::span<const Spin> spins() const noexcept { return spins_; }
    std::span<const double> weights() const noexcept { return weights_; }
    Spin spin(VertexId v) const { return spins_[v]; }
    double weight(VertexId v) const { return weights_[v]; }

    std::span<const VertexId> neighbors(VertexId v) const {
        return std::span<const VertexId>(targets_).subspan(offsets_[v], offsets_[v + 1] - offsets_[v]);
    }

    std::size_t degree(VertexId v) const { return offsets_[v + 1] - offsets_[v]; }

    bool has_edge(VertexId u, VertexId v) const {
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    /// Edges as (u, v) with u < v, lexicographically sorted.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(edge_count());
        for (VertexId u = 0; u < size(); ++u)
            for (VertexId v : neighbors(u))
                if (u < v) out.emplace_back(u, v);
        return out;
    }

private:
    std::vector<Spin> spins_;
    std::vector<double> weights_;
    std::vector<std::size_t> offsets_;
    std::vector<VertexId> targets_;
};

enum class EdgeSampling {
    automatic,  // pairwise up to kPairwiseLimit vertices, grouped beyond
    pairwise,   // one Bernoulli per unordered pair, O(n^2)
    grouped,    // Binomial edge count per (spin, weight) class pair, uniform placement
};

inline constexpr std::size_t kPairwiseLimit = 2000;

namespace detail {

inline void check_edge_probabilities(std::span<const double> weights, double a, double b, std::size_t population) {
    if (weights.empty()) return;
    const double w = *std::max_element(weights.begin(), weights.end());
    if (w * w * std::max(a, b) > static_cast<double>(population))
        throw std::domain_error("edge probability exceeds 1: need phi_max^2 * max(a, b) <= n");
}

inline void pairwise_edges(std::span<const Spin> spins, std::span<const double> weights, double a, double b,
                           double n, Rng& rng, std::vector<Edge>& out) {
    const auto size = static_cast<VertexId>(spins.size());
    for (VertexId u = 0; u < size; ++u) {
        for (VertexId v = u + 1; v < size; ++v) {
            const double rate = spins[u] == spins[v] ? a : b;
            if (bernoulli(rng, weights[u] * weights[v] * rate / n)) out.emplace_back(u, v);
        }
    }
}

// Picks k distinct indices from [0, total) uniformly. Sparse case by
// rejection; dense case by choosing the complement.
inline std::vector<std::uint64_t> distinct_indices(std::uint64_t total, std::uint64_t k, Rng& rng) {
    std::vector<std::uint64_t> out;
    if (k == 0) return out;
    const bool complement = k > total / 2;
    const std::uint64_t draws = complement ? total - k : k;
    std::unordered_set<std::uint64_t> picked;
    picked.reserve(draws * 2);
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    while (picked.size() < draws) picked.insert(pick(rng));
    out.reserve(k);
    if (complement) {
        for (std::uint64_t i = 0; i < total; ++i)
            if (!picked.contains(i)) out.push_back(i);
    } else {
        out.assign(picked.begin(), picked.end());
        std::sort(out.begin(), out.end());
    }
    return out;
}

// idx = r(r-1)/2 + c with 0 <= c < r.
inline std::pair<std::uint64_t, std::uint64_t> lower_triangle_pair(std::uint64_t idx) {
    auto r = static_cast<std::uint64_t>((1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(idx))) / 2.0);
    while (r * (r - 1) / 2 > idx) --r;
    while ((r + 1) * r / 2 <= idx) ++r;
    return {r, idx - r * (r - 1) / 2};
}

inline void grouped_edges(std::span<const Spin> spins, std::span<const double> weights, double a, double b,
                          double n, Rng& rng, std::vector<Edge>& out) {
    std::map<std::pair<int, double>, std::vector<VertexId>> by_class;
    for (VertexId v = 0; v < spins.size(); ++v) by_class[{spin_value(spins[v]), weights[v]}].push_back(v);
    std::vector<const std::vector<VertexId>*> members;
    std::vector<std::pair<int, double>> keys;
    for (const auto& [key, vs] : by_class) {
        keys.push_back(key);
        members.push_back(&vs);
    }

    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i; j < members.size(); ++j) {
            const double rate = keys[i].first == keys[j].first ? a : b;
            const double p = keys[i].second * keys[j].second * rate / n;
            if (!(p > 0.0)) continue;
            const auto& vi = *members[i];
            const auto& vj = *members[j];
            const std::uint64_t si = vi.size();
            const std::uint64_t sj = vj.size();
            const std::uint64_t pairs = i == j ? si * (si - 1) / 2 : si * sj;
            if (pairs == 0) continue;
            std::binomial_distribution<std::uint64_t> count(pairs, std::min(p, 1.0));
            for (std::uint64_t idx : distinct_indices(pairs, count(rng), rng)) {
                if (i == j) {
                    const auto [r, c] = lower_triangle_pair(idx);
                    out.emplace_back(vi[c], vi[r]);
                } else {
                    out.emplace_back(vi[idx / sj], vj[idx % sj]);
                }
            }
        }
    }
}

}  // namespace detail

/// Edges of a DC-PPM graph with the labels held fixed: each unordered pair
/// {u, v} is an edge independently with probability w_u w_v rate / n, where
/// n is the population size (the vertex count unless given).
inline LabeledGraph sample_edges(std::vector<Spin> spins, std::vector<double> weights, double a, double b, Rng& rng,
                                 EdgeSampling method = EdgeSampling::automatic, std::size_t population = 0) {
    if (spins.size() != weights.size()) throw std::invalid_argument("spins and weights must have the same length");
    const std::size_t n = population ? population : spins.size();
    detail::check_edge_probabilities(weights, a, b, n);
    if (method == EdgeSampling::automatic)
        method = spins.size() <= kPairwiseLimit ? EdgeSampling::pairwise : EdgeSampling::grouped;

    std::vector<Edge> edges;
    if (method == EdgeSampling::pairwise)
        detail::pairwise_edges(spins, weights, a, b, static_cast<double>(n), rng, edges);
    else
        detail::grouped_edges(spins, weights, a, b, static_cast<double>(n), rng, edges);
    return LabeledGraph(std::move(spins), std::move(weights), edges);
}

/// Full DC-PPM draw: i.i.d. uniform spins, i.i.d. weights from the law, edges
/// as in sample_edges.
inline LabeledGraph sample_dcppm(std::size_t n, const ModelParams& params, Rng& rng,
                                 EdgeSampling method = EdgeSampling::automatic) {
    if (n < 1) throw std::invalid_argument("graph needs at least one vertex");
    const double wmax = params.law().phi_max();
    if (wmax * wmax * std::max(params.a(), params.b()) > static_cast<double>(n))
        throw std::domain_error("edge probability exceeds 1: need phi_max^2 * max(a, b) <= n");

    const AtomSampler draw_weight(params.law());
    std::vector<Spin> spins(n);
    std::vector<double> weights(n);
    for (std::size_t v = 0; v < n; ++v) {
        spins[v] = random_spin(rng);
        weights[v] = params.law().atoms()[draw_weight(rng)].value;
    }
    return sample_edges(std::move(spins), std::move(weights), params.a(), params.b(), rng, method);
}

inline LabeledGraph sample_dcppm(std::size_t n, const ModelParams& params, Seed seed,
                                 EdgeSampling method = EdgeSampling::automatic) {
    Rng rng = make_rng(seed);
    return sample_dcppm(n, params, rng, method);
}

/// BFS ball around a vertex, as a tree, with the original vertex ids.
struct LabeledNeighborhood {
    LabeledTree tree;
    std::vector<VertexId> vertex_of;  // tree node -> graph vertex
    VertexId root_vertex = 0;
    int radius = 0;
    bool truncated = false;  // the ball contains a non-tree edge
};

/// Explores the ball of the given radius. Vertices of equal distance are
/// explored in ascending id order, and so are the neighbours of each one, so
/// a vertex reachable from two parents hangs under the smaller one.
inline LabeledNeighborhood neighborhood(const LabeledGraph& graph, VertexId root, int radius) {
    if (root >= graph.size()) throw std::out_of_range("root vertex out of range");
    if (radius < 0) throw std::invalid_argument("radius must be nonnegative");

    constexpr std::int32_t unseen = -1;
    std::vector<std::int32_t> node_of(graph.size(), unseen);
    std::vector<TreeNode> nodes;
    std::vector<VertexId> vertex_of;

    nodes.push_back({kNoParent, 0, graph.spin(root), graph.weight(root)});
    vertex_of.push_back(root);
    node_of[root] = 0;

    std::vector<VertexId> level{root};
    for (int d = 0; d < radius && !level.empty(); ++d) {
        std::vector<VertexId> next;
        for (VertexId u : level) {
            for (VertexId v : graph.neighbors(u)) {
                if (node_of[v] != unseen) continue;
                node_of[v] = unseen - 1;  // claimed; node index assigned below
                next.push_back(v);
                vertex_of.push_back(v);  // placeholder order, rewritten below
                nodes.push_back({node_of[u], d + 1, graph.spin(v), graph.weight(v)});
            }
        }
        // Generation-major storage in exploration order: ascending vertex id.
        const std::size_t first = nodes.size() - next.size();
        std::vector<std::size_t> order(next.size());
        for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return next[x] < next[y]; });
        std::vector<TreeNode> sorted_nodes;
        std::vector<VertexId> sorted_level;
        sorted_nodes.reserve(order.size());
        sorted_level.reserve(order.size());
        for (std::size_t k : order) {
            sorted_nodes.push_back(nodes[first + k]);
            sorted_level.push_back(next[k]);
        }
        for (std::size_t k = 0; k < order.size(); ++k) {
            nodes[first + k] = sorted_nodes[k];
            vertex_of[first + k] = sorted_level[k];
            node_of[sorted_level[k]] = static_cast<std::int32_t>(first + k);
        }
        level = std::move(sorted_level);
    }

    bool truncated = false;
    for (std::size_t i = 0; i < vertex_of.size() && !truncated; ++i) {
        const VertexId u = vertex_of[i];
        for (VertexId v : graph.neighbors(u)) {
            const std::int32_t j = node_of[v];
            if (j < 0) continue;
            const bool tree_edge = nodes[i].parent == j || nodes[j].parent == static_cast<std::int32_t>(i);
            if (!tree_edge) {
                truncated = true;
                break;
            }
        }
    }

    return {LabeledTree(std::move(nodes)), std::move(vertex_of), root, radius, truncated};
}

inline double largest_component_fraction(const LabeledGraph& graph) {
    const std::size_t n = graph.size();
    if (n == 0) return 0.0;
    std::vector<bool> seen(n, false);
    std::vector<VertexId> stack;
    std::size_t best = 0;
    for (VertexId s = 0; s < n; ++s) {
        if (seen[s]) continue;
        std::size_t count = 0;
        seen[s] = true;
        stack.push_back(s);
        while (!stack.empty()) {
            const VertexId u = stack.back();
            stack.pop_back();
            ++count;
            for (VertexId v : graph.neighbors(u)) {
                if (!seen[v]) {
                    seen[v] = true;
                    stack.push_back(v);
                }
            }
        }
        best = std::max(best, count);
    }
    return static_cast<double>(best) / static_cast<double>(n);
}

}  // namespace dcppm
