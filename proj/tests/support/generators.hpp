#pragma once

// Small random instances shared by the unit and acceptance tests.

#include <cstddef>
#include <queue>
#include <random>
#include <vector>

#include "dcppm/dcppm.hpp"

namespace gen {

using dcppm::Spin;

/// Uniform random recursive tree on `nodes` vertices, relabelled into
/// generation-major order, with i.i.d. uniform spins and weights in {1, 2}.
inline dcppm::LabeledTree random_tree(std::size_t nodes, std::mt19937_64& rng) {
    std::vector<std::vector<std::size_t>> children(nodes);
    for (std::size_t i = 1; i < nodes; ++i) children[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)].push_back(i);
    std::vector<dcppm::TreeNode> out;
    std::queue<std::pair<std::size_t, std::int32_t>> todo;  // (old id, new parent id)
    todo.push({0, dcppm::kNoParent});
    std::bernoulli_distribution coin(0.5);
    while (!todo.empty()) {
        const auto [v, parent] = todo.front();
        todo.pop();
        dcppm::TreeNode node;
        node.parent = parent;
        node.depth = parent == dcppm::kNoParent ? 0 : out[static_cast<std::size_t>(parent)].depth + 1;
        node.spin = coin(rng) ? Spin::plus : Spin::minus;
        node.weight = coin(rng) ? 1.0 : 2.0;
        const auto id = static_cast<std::int32_t>(out.size());
        out.push_back(node);
        for (std::size_t c : children[v]) todo.push({c, id});
    }
    return dcppm::LabeledTree(std::move(out));
}

/// Erdos-Renyi style graph with edge density `p`, random spins, weights in {1, 2}.
inline dcppm::LabeledGraph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5), edge(p);
    std::vector<Spin> spins(n);
    std::vector<double> weights(n);
    for (std::size_t v = 0; v < n; ++v) {
        spins[v] = coin(rng) ? Spin::plus : Spin::minus;
        weights[v] = coin(rng) ? 1.0 : 2.0;
    }
    std::vector<dcppm::Edge> edges;
    for (dcppm::VertexId u = 0; u < n; ++u)
        for (dcppm::VertexId v = u + 1; v < n; ++v)
            if (edge(rng)) edges.push_back({u, v});
    return dcppm::LabeledGraph(std::move(spins), std::move(weights), edges);
}

/// Graph on `n` vertices with the given parent array as its edge set.
inline dcppm::LabeledGraph tree_graph(const std::vector<std::size_t>& parent, std::span<const double> weights) {
    const std::size_t n = parent.size();
    std::vector<dcppm::Edge> edges;
    for (std::size_t v = 1; v < n; ++v)
        edges.push_back({static_cast<dcppm::VertexId>(parent[v]), static_cast<dcppm::VertexId>(v)});
    return dcppm::LabeledGraph(std::vector<Spin>(n, Spin::plus), std::vector<double>(weights.begin(), weights.end()),
                               edges);
}

}  // namespace gen
