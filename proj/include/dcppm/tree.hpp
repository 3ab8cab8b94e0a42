#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "dcppm/model.hpp"
#include "dcppm/random.hpp"

namespace dcppm {

inline constexpr std::int32_t kNoParent = -1;

struct TreeNode {
    std::int32_t parent = kNoParent;
    int depth = 0;
    Spin spin = Spin::plus;
    double weight = 1.0;
};

struct NodeRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
};

/// Rooted tree in generation-major (BFS) order: node 0 is the root, every
/// parent precedes its children and depths never decrease along the array.
class LabeledTree {
public:
    explicit LabeledTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
        if (nodes_.empty()) throw std::invalid_argument("tree needs a root");
        if (nodes_[0].parent != kNoParent || nodes_[0].depth != 0)
            throw std::invalid_argument("node 0 must be a depth-0 root");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const TreeNode& v = nodes_[i];
            if (!std::isfinite(v.weight) || v.weight <= 0.0) throw std::invalid_argument("node weights must be positive");
            if (i == 0) continue;
            if (v.parent < 0 || static_cast<std::size_t>(v.parent) >= i)
                throw std::invalid_argument("parent must precede child");
            if (v.depth != nodes_[v.parent].depth + 1) throw std::invalid_argument("child depth must be parent depth + 1");
            if (v.depth < nodes_[i - 1].depth) throw std::invalid_argument("nodes must be in generation-major order");
        }
        level_offsets_.push_back(0);
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (nodes_[i].depth != nodes_[i - 1].depth) level_offsets_.push_back(i);
        level_offsets_.push_back(nodes_.size());
    }

    std::size_t size() const noexcept { return nodes_.size(); }
    std::span<const TreeNode> nodes() const noexcept { return nodes_; }
    const TreeNode& operator[](std::size_t i) const { return nodes_[i]; }
    const TreeNode& root() const noexcept { return nodes_.front(); }

    int max_depth() const noexcept { return nodes_.back().depth; }

    NodeRange generation(int depth) const noexcept {
        if (depth < 0 || depth > max_depth()) return {nodes_.size(), nodes_.size()};
        return {level_offsets_[depth], level_offsets_[depth + 1]};
    }

    std::size_t generation_size(int depth) const noexcept { return generation(depth).size(); }

    std::vector<Spin> spins() const {
        std::vector<Spin> s;
        s.reserve(nodes_.size());
        for (const TreeNode& v : nodes_) s.push_back(v.spin);
        return s;
    }

    std::vector<Spin> generation_spins(int depth) const {
        const NodeRange r = generation(depth);
        std::vector<Spin> s;
        s.reserve(r.size());
        for (std::size_t i = r.begin; i < r.end; ++i) s.push_back(nodes_[i].spin);
        return s;
    }

    /// Same shape and weights, new spins.
    LabeledTree with_spins(std::span<const Spin> spins) const {
        if (spins.size() != nodes_.size()) throw std::invalid_argument("spin count does not match tree size");
        LabeledTree copy = *this;
        for (std::size_t i = 0; i < spins.size(); ++i) copy.nodes_[i].spin = spins[i];
        return copy;
    }

private:
    std::vector<TreeNode> nodes_;
    std::vector<std::size_t> level_offsets_;
};

enum class RootLaw { plain, size_biased };

struct BroadcastParams {
    double epsilon = 0.0;
};

struct TreeSample {
    LabeledTree tree;
    std::size_t discarded = 0;  // overflowed attempts thrown away before this one
};

inline constexpr std::size_t kDefaultPopulationCap = 1'000'000;

namespace detail {

inline int poisson(Rng& rng, const std::optional<std::poisson_distribution<int>::param_type>& param) {
    if (!param) return 0;
    std::poisson_distribution<int> dist;
    return dist(rng, *param);
}

inline std::optional<std::poisson_distribution<int>::param_type> poisson_param(double mean) {
    if (!(mean > 0.0)) return std::nullopt;
    return std::poisson_distribution<int>::param_type(mean);
}

}  // namespace detail

/// Poisson-mixture branching process. A particle of spin s and weight w has
/// Poi(a/2 Phi1 w) children of spin s and Poi(b/2 Phi1 w) of spin -s; child
/// weights are i.i.d. size-biased.
class TpoiSampler {
public:
    explicit TpoiSampler(ModelParams params, std::size_t population_cap = kDefaultPopulationCap)
        : params_(std::move(params)),
          biased_(size_biased(params_.law())),
          root_plain_(params_.law()),
          root_biased_(biased_),
          child_weight_(biased_),
          cap_(population_cap) {
        const double m1 = params_.law().m1();
        for (const Atom& w : params_.law().atoms()) {
            same_.push_back(detail::poisson_param(0.5 * params_.a() * m1 * w.value));
            opposite_.push_back(detail::poisson_param(0.5 * params_.b() * m1 * w.value));
        }
    }

    const ModelParams& params() const noexcept { return params_; }

    /// Returns nullopt when the population exceeds the cap.
    std::optional<LabeledTree> try_sample(int depth, RootLaw root_law, Rng& rng) const {
        if (depth < 0) throw std::invalid_argument("depth must be nonnegative");
        const auto& atoms = params_.law().atoms();
        std::vector<TreeNode> nodes;
        std::vector<std::uint32_t> atom_of;

        const std::size_t root_atom = root_law == RootLaw::plain ? root_plain_(rng) : root_biased_(rng);
        nodes.push_back({kNoParent, 0, random_spin(rng), atoms[root_atom].value});
        atom_of.push_back(static_cast<std::uint32_t>(root_atom));

        std::size_t begin = 0;
        for (int d = 0; d < depth; ++d) {
            const std::size_t end = nodes.size();
            for (std::size_t i = begin; i < end; ++i) {
                const int n_same = detail::poisson(rng, same_[atom_of[i]]);
                const int n_opp = detail::poisson(rng, opposite_[atom_of[i]]);
                if (nodes.size() + n_same + n_opp > cap_) return std::nullopt;
                const Spin s = nodes[i].spin;
                for (int k = 0; k < n_same + n_opp; ++k) {
                    const std::size_t w = child_weight_(rng);
                    nodes.push_back({static_cast<std::int32_t>(i), d + 1, k < n_same ? s : flip(s), atoms[w].value});
                    atom_of.push_back(static_cast<std::uint32_t>(w));
                }
            }
            if (nodes.size() == end) break;
            begin = end;
        }
        return LabeledTree(std::move(nodes));
    }

    /// Resamples with fresh derived seeds until a sample fits under the cap.
    TreeSample sample(int depth, RootLaw root_law, Seed seed) const {
        for (std::size_t attempt = 0;; ++attempt) {
            Rng rng = make_rng(attempt == 0 ? seed : derive_seed(seed, {attempt}));
            if (auto tree = try_sample(depth, root_law, rng)) return {std::move(*tree), attempt};
        }
    }

private:
    ModelParams params_;
    WeightLaw biased_;
    AtomSampler root_plain_;
    AtomSampler root_biased_;
    AtomSampler child_weight_;
    std::vector<std::optional<std::poisson_distribution<int>::param_type>> same_;
    std::vector<std::optional<std::poisson_distribution<int>::param_type>> opposite_;
    std::size_t cap_;
};

inline TreeSample sample_tpoi(const ModelParams& params, int depth, RootLaw root_law, Seed seed,
                              std::size_t population_cap = kDefaultPopulationCap) {
    return TpoiSampler(params, population_cap).sample(depth, root_law, seed);
}

/// Typed description of the same process: a particle of type x has
/// Poi(lambda_total(x)) children with i.i.d. types from offspring_type_law(x).
class TypedTpoiSampler {
public:
    explicit TypedTpoiSampler(ModelParams params, std::size_t population_cap = kDefaultPopulationCap)
        : params_(std::move(params)),
          root_plain_(base_type_law(params_.law())),
          root_biased_(size_biased_type_law(params_.law())),
          cap_(population_cap) {
        if (params_.a() + params_.b() > 0.0) {
            const TypeLaw mu = base_type_law(params_.law());
            for (const TypeAtom& x : mu.atoms()) {
                types_.push_back(x.type);
                counts_.push_back(detail::poisson_param(lambda_total(x.type, params_)));
                children_.emplace_back(offspring_type_law(x.type, params_));
            }
        }
    }

    std::optional<LabeledTree> try_sample(int depth, RootLaw root_law, Rng& rng) const {
        if (depth < 0) throw std::invalid_argument("depth must be nonnegative");
        std::vector<TreeNode> nodes;
        const SignedType root = root_law == RootLaw::plain ? root_plain_(rng) : root_biased_(rng);
        nodes.push_back({kNoParent, 0, root.sign, root.weight});

        std::size_t begin = 0;
        for (int d = 0; d < depth && !types_.empty(); ++d) {
            const std::size_t end = nodes.size();
            for (std::size_t i = begin; i < end; ++i) {
                const std::size_t t = type_index({nodes[i].spin, nodes[i].weight});
                const int count = detail::poisson(rng, counts_[t]);
                if (nodes.size() + count > cap_) return std::nullopt;
                for (int k = 0; k < count; ++k) {
                    const SignedType y = children_[t](rng);
                    nodes.push_back({static_cast<std::int32_t>(i), d + 1, y.sign, y.weight});
                }
            }
            if (nodes.size() == end) break;
            begin = end;
        }
        return LabeledTree(std::move(nodes));
    }

    TreeSample sample(int depth, RootLaw root_law, Seed seed) const {
        for (std::size_t attempt = 0;; ++attempt) {
            Rng rng = make_rng(attempt == 0 ? seed : derive_seed(seed, {attempt}));
            if (auto tree = try_sample(depth, root_law, rng)) return {std::move(*tree), attempt};
        }
    }

private:
    std::size_t type_index(const SignedType& x) const {
        for (std::size_t i = 0; i < types_.size(); ++i)
            if (types_[i] == x) return i;
        throw std::logic_error("type outside the law's support");
    }

    ModelParams params_;
    TypeSampler root_plain_;
    TypeSampler root_biased_;
    std::vector<SignedType> types_;
    std::vector<std::optional<std::poisson_distribution<int>::param_type>> counts_;
    std::vector<TypeSampler> children_;
    std::size_t cap_;
};

inline TreeSample sample_tpoi_typed(const ModelParams& params, int depth, Seed seed,
                                    RootLaw root_law = RootLaw::plain,
                                    std::size_t population_cap = kDefaultPopulationCap) {
    return TypedTpoiSampler(params, population_cap).sample(depth, root_law, seed);
}

/// Markov broadcast on the tree's shape (its spins are ignored): uniform
/// root, each child copies its parent with probability 1 - epsilon.
inline std::vector<Spin> broadcast_labels(const LabeledTree& shape, BroadcastParams bp, Rng& rng) {
    if (!(bp.epsilon >= 0.0 && bp.epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1)");
    std::vector<Spin> labels(shape.size());
    labels[0] = random_spin(rng);
    for (std::size_t i = 1; i < shape.size(); ++i) {
        const Spin parent = labels[shape[i].parent];
        labels[i] = bernoulli(rng, bp.epsilon) ? flip(parent) : parent;
    }
    return labels;
}

inline std::vector<Spin> broadcast_labels(const LabeledTree& shape, BroadcastParams bp, Seed seed) {
    Rng rng = make_rng(seed);
    return broadcast_labels(shape, bp, rng);
}

}  // namespace dcppm
