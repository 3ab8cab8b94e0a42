#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "dcppm/tree.hpp"
#include "support/oracles.hpp"

using namespace dcppm;

namespace {

WeightLaw uniform12() { return make_weight_law({{1.0, 0.5}, {2.0, 0.5}}); }

LabeledTree star(std::size_t leaves) {
    std::vector<TreeNode> nodes{{kNoParent, 0, Spin::plus, 1.0}};
    for (std::size_t i = 0; i < leaves; ++i) nodes.push_back({0, 1, Spin::plus, 1.0});
    return LabeledTree(std::move(nodes));
}

double parent_agreement(const LabeledTree& t, std::span<const Spin> s) {
    std::size_t agree = 0;
    for (std::size_t i = 1; i < t.size(); ++i) agree += s[i] == s[t[i].parent];
    return static_cast<double>(agree) / static_cast<double>(t.size() - 1);
}

}  // namespace

TEST(LabeledTree, Validation) {
    EXPECT_THROW(LabeledTree({}), std::invalid_argument);
    EXPECT_THROW(LabeledTree({{0, 0, Spin::plus, 1.0}}), std::invalid_argument);
    EXPECT_THROW(LabeledTree({{kNoParent, 0, Spin::plus, 1.0}, {0, 2, Spin::plus, 1.0}}), std::invalid_argument);
    EXPECT_THROW(LabeledTree({{kNoParent, 0, Spin::plus, 1.0}, {0, 1, Spin::plus, -1.0}}), std::invalid_argument);
    EXPECT_THROW(LabeledTree({{kNoParent, 0, Spin::plus, 1.0},
                              {0, 1, Spin::plus, 1.0},
                              {1, 2, Spin::plus, 1.0},
                              {0, 1, Spin::plus, 1.0}}),
                 std::invalid_argument);
    const LabeledTree t({{kNoParent, 0, Spin::plus, 1.0}, {0, 1, Spin::minus, 1.0}, {1, 2, Spin::plus, 2.0}});
    EXPECT_EQ(t.max_depth(), 2);
    EXPECT_EQ(t.generation_size(1), 1u);
    EXPECT_EQ(t.generation_size(5), 0u);
}

TEST(Tpoi, ZeroRatesRootOnly) {
    const ModelParams p(0.0, 0.0, uniform12());
    EXPECT_EQ(sample_tpoi(p, 5, RootLaw::plain, 1).tree.size(), 1u);
    EXPECT_EQ(sample_tpoi_typed(p, 5, 1).tree.size(), 1u);
}

TEST(Tpoi, MeanRootOffspring) {
    const ModelParams p(3.0, 1.0, uniform12());
    const TpoiSampler sampler(p);
    const std::size_t draws = 100000;
    for (RootLaw root : {RootLaw::plain, RootLaw::size_biased}) {
        Rng rng = make_rng(root == RootLaw::plain ? 1 : 2);
        double sum = 0, sq = 0;
        for (std::size_t t = 0; t < draws; ++t) {
            const double k = static_cast<double>(sampler.try_sample(1, root, rng)->generation_size(1));
            sum += k, sq += k * k;
        }
        const double mean = sum / draws, sd = std::sqrt((sq / draws - mean * mean) / draws);
        const double root_mean = root == RootLaw::plain ? p.law().m1() : p.law().m2() / p.law().m1();
        EXPECT_NEAR(mean, 0.5 * (p.a() + p.b()) * p.law().m1() * root_mean, 3 * sd);
    }
    // for the size-biased root the mean is (a + b)/2 Phi2
    EXPECT_NEAR(0.5 * (p.a() + p.b()) * p.law().m1() * (p.law().m2() / p.law().m1()), p.offspring_mean(), 1e-12);
}

TEST(Tpoi, SameSpinFraction) {
    const ModelParams p(3.0, 1.0, uniform12());
    const TpoiSampler sampler(p);
    Rng rng = make_rng(4);
    double same = 0, total = 0;
    for (int t = 0; t < 50000; ++t) {
        const LabeledTree tree = *sampler.try_sample(1, RootLaw::plain, rng);
        for (std::size_t i = 1; i < tree.size(); ++i) same += tree[i].spin == tree.root().spin;
        total += static_cast<double>(tree.size() - 1);
    }
    EXPECT_NEAR(same / total, 0.75, 3 * std::sqrt(0.75 * 0.25 / total));
}

TEST(Tpoi, TypedSamplerMatchesOffspringCount) {
    const ModelParams p(4.0, 1.5, make_weight_law({{0.5, 0.3}, {1.0, 0.4}, {2.0, 0.3}}));
    const TpoiSampler plain(p);
    const TypedTpoiSampler typed(p);
    std::map<int, double> cx, cy;
    std::map<std::tuple<bool, double>, double> jx, jy;
    Rng rx = make_rng(10), ry = make_rng(11), pick = make_rng(12);
    auto child = [&](const LabeledTree& t) {
        std::uniform_int_distribution<std::size_t> u(1, t.size() - 1);
        const TreeNode& c = t[u(pick)];
        return std::tuple{c.spin == t.root().spin, c.weight};
    };
    for (int t = 0; t < 100000; ++t) {
        const LabeledTree a = *plain.try_sample(1, RootLaw::plain, rx);
        const LabeledTree b = *typed.try_sample(1, RootLaw::plain, ry);
        cx[static_cast<int>(a.size() - 1)] += 1;
        cy[static_cast<int>(b.size() - 1)] += 1;
        if (a.size() > 1) jx[child(a)] += 1;
        if (b.size() > 1) jy[child(b)] += 1;
    }
    EXPECT_GT(oracle::chi_square_two_sample(cx, cy).p_value, 1e-3);
    EXPECT_GT(oracle::chi_square_two_sample(jx, jy).p_value, 1e-3);
}

TEST(Tpoi, GenerationGrowth) {
    const ModelParams p(2.0, 1.0, uniform12());
    const TpoiSampler sampler(p);
    Rng rng = make_rng(12);
    const int draws = 40000;
    std::vector<double> sum(5, 0), sq(5, 0);
    for (int t = 0; t < draws; ++t) {
        const LabeledTree tree = *sampler.try_sample(4, RootLaw::plain, rng);
        for (int d = 1; d <= 4; ++d) {
            const double g = static_cast<double>(tree.generation_size(d));
            sum[d] += g, sq[d] += g * g;
        }
    }
    const double first = 0.5 * (p.a() + p.b()) * p.law().m1() * p.law().m1();
    for (int d = 1; d <= 4; ++d) {
        const double mean = sum[d] / draws, se = std::sqrt((sq[d] / draws - mean * mean) / draws);
        EXPECT_NEAR(mean, std::pow(p.offspring_mean(), d - 1) * first, 3 * se) << "generation " << d;
    }
}

TEST(Tpoi, SpinsFollowBroadcastOnShape) {
    // Joint law of (same-as-root count at depth 1, at depth 2) from the sampler
    // versus broadcast relabelling of the same shapes.
    const ModelParams p(3.0, 1.0, uniform12());
    const TpoiSampler sampler(p);
    Rng rng = make_rng(13), relabel = make_rng(14);
    std::map<std::tuple<int, int, int, int>, double> native, broadcast;
    auto key = [](const LabeledTree& t, std::span<const Spin> s) {
        int same1 = 0, same2 = 0;
        for (std::size_t i = 1; i < t.size(); ++i) (t[i].depth == 1 ? same1 : same2) += s[i] == s[0];
        return std::tuple{static_cast<int>(t.generation_size(1)), static_cast<int>(t.generation_size(2)), same1,
                          same2};
    };
    for (int t = 0; t < 60000; ++t) {
        const LabeledTree tree = *sampler.try_sample(2, RootLaw::plain, rng);
        native[key(tree, tree.spins())] += 1;
        const std::vector<Spin> s = broadcast_labels(tree, {p.epsilon()}, relabel);
        broadcast[key(tree, s)] += 1;
    }
    EXPECT_GT(oracle::chi_square_two_sample(native, broadcast).p_value, 1e-3);
}

TEST(Tpoi, ChildWeightIndependentOfSpins) {
    const ModelParams p(3.0, 1.0, uniform12());
    const TpoiSampler sampler(p);
    Rng rng = make_rng(15);
    std::map<double, double> agree, disagree;
    for (int t = 0; t < 30000; ++t) {
        const LabeledTree tree = *sampler.try_sample(2, RootLaw::plain, rng);
        for (std::size_t i = 1; i < tree.size(); ++i)
            (tree[i].spin == tree[tree[i].parent].spin ? agree : disagree)[tree[i].weight] += 1;
    }
    EXPECT_GT(oracle::chi_square_two_sample(agree, disagree).p_value, 1e-3);
}

TEST(Tpoi, SurvivalRegimes) {
    const WeightLaw one = WeightLaw::point_mass(1.0);
    auto survival = [&](const ModelParams& p) {
        const TpoiSampler sampler(p);
        Rng rng = make_rng(16);
        int alive = 0;
        for (int t = 0; t < 2000; ++t) alive += sampler.try_sample(12, RootLaw::plain, rng)->generation_size(12) > 0;
        return alive / 2000.0;
    };
    EXPECT_GT(survival(ModelParams(1.6, 0.8, one)), 0.1);   // offspring mean 1.2
    EXPECT_LT(survival(ModelParams(0.6, 0.4, one)), 0.02);  // offspring mean 0.5
}

TEST(Tpoi, PopulationCapResamples) {
    const ModelParams p(5.0, 1.0, WeightLaw::point_mass(1.0));
    const TpoiSampler tiny(p, 50);
    Rng rng = make_rng(17);
    int overflow = 0;
    for (int t = 0; t < 200; ++t) overflow += !tiny.try_sample(6, RootLaw::plain, rng).has_value();
    EXPECT_GT(overflow, 0);
    std::size_t discarded = 0;
    for (Seed s = 0; s < 50; ++s) {
        const TreeSample sample = tiny.sample(6, RootLaw::plain, s);
        EXPECT_LE(sample.tree.size(), 50u);
        discarded += sample.discarded;
    }
    EXPECT_GT(discarded, 0u);
}

TEST(Tpoi, Deterministic) {
    const ModelParams p(3.0, 1.0, uniform12());
    const LabeledTree x = sample_tpoi(p, 4, RootLaw::plain, 99).tree;
    const LabeledTree y = sample_tpoi(p, 4, RootLaw::plain, 99).tree;
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_EQ(x[i].parent, y[i].parent);
        EXPECT_EQ(x[i].spin, y[i].spin);
        EXPECT_EQ(x[i].weight, y[i].weight);
    }
}

TEST(Broadcast, NoFlips) {
    const LabeledTree t = sample_tpoi(ModelParams(3.0, 1.0, uniform12()), 4, RootLaw::plain, 5).tree;
    const std::vector<Spin> s = broadcast_labels(t, {0.0}, Seed{1});
    for (Spin x : s) EXPECT_EQ(x, s[0]);
}

TEST(Broadcast, HalfIsIndependent) {
    const LabeledTree t = star(10000);
    const double agree = parent_agreement(t, broadcast_labels(t, {0.5}, Seed{2}));
    EXPECT_NEAR(agree, 0.5, 3 * std::sqrt(0.25 / 10000));
}

TEST(Broadcast, StarAgreement) {
    const LabeledTree t = star(10000);
    const double agree = parent_agreement(t, broadcast_labels(t, {0.25}, Seed{3}));
    EXPECT_NEAR(agree, 0.75, 3 * std::sqrt(0.75 * 0.25 / 10000));
}

TEST(Broadcast, RootUniform) {
    const LabeledTree t = star(1);
    Rng rng = make_rng(4);
    int plus = 0;
    for (int i = 0; i < 20000; ++i) plus += broadcast_labels(t, {0.1}, rng)[0] == Spin::plus;
    EXPECT_NEAR(plus / 20000.0, 0.5, 3 * std::sqrt(0.25 / 20000));
}

TEST(Broadcast, RejectsEpsilon) {
    EXPECT_THROW(broadcast_labels(star(2), {1.0}, Seed{1}), std::invalid_argument);
    EXPECT_THROW(broadcast_labels(star(2), {-0.1}, Seed{1}), std::invalid_argument);
}
