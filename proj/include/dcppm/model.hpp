#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcppm/random.hpp"

namespace dcppm {

enum class Spin : std::int8_t { minus = -1, plus = 1 };

inline constexpr Spin flip(Spin s) noexcept { return s == Spin::plus ? Spin::minus : Spin::plus; }
inline constexpr int spin_value(Spin s) noexcept { return static_cast<int>(s); }
inline constexpr char spin_char(Spin s) noexcept { return s == Spin::plus ? '+' : '-'; }

inline Spin spin_from_char(char c) {
    if (c == '+') return Spin::plus;
    if (c == '-') return Spin::minus;
    throw std::invalid_argument(std::string("spin must be '+' or '-', got '") + c + "'");
}

inline Spin random_spin(Rng& rng) { return bernoulli(rng, 0.5) ? Spin::plus : Spin::minus; }

struct Atom {
    double value = 0.0;
    double prob = 0.0;
};

/// Finite-support law of vertex weights. Canonical form: atoms sorted by
/// value, distinct values, strictly positive probabilities summing to one.
/// Moments are computed once here and read everywhere else.
class WeightLaw {
public:
    static WeightLaw from_atoms(std::span<const Atom> atoms) {
        if (atoms.empty()) throw std::invalid_argument("weight law needs at least one atom");
        std::vector<Atom> sorted(atoms.begin(), atoms.end());
        for (const Atom& a : sorted) {
            if (!std::isfinite(a.value) || a.value <= 0.0)
                throw std::invalid_argument("weight values must be finite and positive");
            if (!std::isfinite(a.prob) || a.prob < 0.0)
                throw std::invalid_argument("atom probabilities must be finite and nonnegative");
        }
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const Atom& x, const Atom& y) { return x.value < y.value; });

        std::vector<Atom> merged;
        for (const Atom& a : sorted) {
            if (!merged.empty() && merged.back().value == a.value)
                merged.back().prob += a.prob;
            else
                merged.push_back(a);
        }
        std::erase_if(merged, [](const Atom& a) { return a.prob == 0.0; });
        if (merged.empty()) throw std::invalid_argument("all atom probabilities are zero");

        double total = 0.0;
        for (const Atom& a : merged) total += a.prob;
        for (Atom& a : merged) a.prob /= total;

        WeightLaw law;
        law.atoms_ = std::move(merged);
        for (const Atom& a : law.atoms_) {
            law.m1_ += a.value * a.prob;
            law.m2_ += a.value * a.value * a.prob;
        }
        return law;
    }

    static WeightLaw point_mass(double value) {
        const Atom atom{value, 1.0};
        return from_atoms(std::span<const Atom>(&atom, 1));
    }

    std::span<const Atom> atoms() const& noexcept { return atoms_; }
    std::span<const Atom> atoms() const&& = delete;
    std::size_t size() const noexcept { return atoms_.size(); }
    double phi_min() const noexcept { return atoms_.front().value; }
    double phi_max() const noexcept { return atoms_.back().value; }
    double m1() const noexcept { return m1_; }
    double m2() const noexcept { return m2_; }

    std::vector<double> probabilities() const {
        std::vector<double> p;
        p.reserve(atoms_.size());
        for (const Atom& a : atoms_) p.push_back(a.prob);
        return p;
    }

    /// Index of the atom carrying exactly this value, or size() if absent.
    std::size_t find(double value) const noexcept {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), value,
                                   [](const Atom& a, double v) { return a.value < v; });
        if (it == atoms_.end() || it->value != value) return atoms_.size();
        return static_cast<std::size_t>(it - atoms_.begin());
    }

    std::size_t index_of(double value) const {
        const std::size_t i = find(value);
        if (i == atoms_.size()) throw std::out_of_range("weight is not an atom of the law");
        return i;
    }

    bool contains(double value) const noexcept { return find(value) != atoms_.size(); }

    friend bool operator==(const WeightLaw& x, const WeightLaw& y) noexcept {
        return std::equal(x.atoms_.begin(), x.atoms_.end(), y.atoms_.begin(), y.atoms_.end(),
                          [](const Atom& p, const Atom& q) { return p.value == q.value && p.prob == q.prob; });
    }

private:
    WeightLaw() = default;

    std::vector<Atom> atoms_;
    double m1_ = 0.0;
    double m2_ = 0.0;
};

inline WeightLaw make_weight_law(std::span<const Atom> atoms) { return WeightLaw::from_atoms(atoms); }

inline WeightLaw make_weight_law(std::initializer_list<Atom> atoms) {
    return WeightLaw::from_atoms(std::span<const Atom>(atoms.begin(), atoms.size()));
}

/// Reweights each atom by value / m1 (the law of a vertex reached by
/// following an edge).
inline WeightLaw size_biased(const WeightLaw& law) {
    std::vector<Atom> atoms;
    atoms.reserve(law.size());
    for (const Atom& a : law.atoms()) atoms.push_back({a.value, a.value * a.prob / law.m1()});
    return WeightLaw::from_atoms(atoms);
}

/// Draws atom indices of a WeightLaw.
class AtomSampler {
public:
    explicit AtomSampler(const WeightLaw& law) {
        const auto p = law.probabilities();
        param_ = std::discrete_distribution<std::size_t>::param_type(p.begin(), p.end());
    }

    std::size_t operator()(Rng& rng) const {
        std::discrete_distribution<std::size_t> dist;
        return dist(rng, param_);
    }

private:
    std::discrete_distribution<std::size_t>::param_type param_;
};

/// Rates a (same community) and b (across), plus the weight law. a = b = 0
/// is a valid (edgeless) model; operations that divide by a + b reject it.
class ModelParams {
public:
    ModelParams(double a, double b, WeightLaw law) : a_(a), b_(b), law_(std::move(law)) {
        if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0)
            throw std::invalid_argument("rates a and b must be finite and nonnegative");
    }

    double a() const noexcept { return a_; }
    double b() const noexcept { return b_; }
    const WeightLaw& law() const noexcept { return law_; }

    double kappa_max() const noexcept { return std::max(a_, b_) * law_.phi_max() * law_.phi_max(); }
    double kappa_min() const noexcept { return std::min(a_, b_) * law_.phi_min() * law_.phi_min(); }

    /// Mean offspring of a size-biased particle: (a+b)/2 * Phi2.
    double offspring_mean() const noexcept { return 0.5 * (a_ + b_) * law_.m2(); }

    /// Flip probability of the broadcast channel, b / (a + b).
    double epsilon() const {
        require_positive_total();
        return b_ / (a_ + b_);
    }

    void require_positive_total() const {
        if (!(a_ + b_ > 0.0)) throw std::domain_error("operation requires a + b > 0");
    }

private:
    double a_;
    double b_;
    WeightLaw law_;
};

/// x = sign * weight, a point of S = -W u W.
struct SignedType {
    Spin sign = Spin::plus;
    double weight = 1.0;

    double value() const noexcept { return spin_value(sign) * weight; }
    friend bool operator==(const SignedType&, const SignedType&) = default;
};

inline double kernel(const SignedType& x, const SignedType& y, const ModelParams& params) noexcept {
    const double rate = x.sign == y.sign ? params.a() : params.b();
    return x.weight * y.weight * rate;
}

/// Total offspring intensity of type x: |x| (a+b)/2 Phi1.
inline double lambda_total(const SignedType& x, const ModelParams& params) noexcept {
    return x.weight * 0.5 * (params.a() + params.b()) * params.law().m1();
}

struct TypeAtom {
    SignedType type;
    double prob = 0.0;
};

/// Finite-support law over signed types, ordered by signed value.
class TypeLaw {
public:
    /// Normalizes nonnegative masses; zero-mass atoms are dropped.
    static TypeLaw from_masses(std::vector<TypeAtom> atoms) {
        double total = 0.0;
        for (const TypeAtom& a : atoms) {
            if (!std::isfinite(a.prob) || a.prob < 0.0) throw std::invalid_argument("type masses must be nonnegative");
            total += a.prob;
        }
        if (!(total > 0.0)) throw std::invalid_argument("type law has zero total mass");
        std::erase_if(atoms, [](const TypeAtom& a) { return a.prob == 0.0; });
        std::sort(atoms.begin(), atoms.end(),
                  [](const TypeAtom& x, const TypeAtom& y) { return x.type.value() < y.type.value(); });
        for (std::size_t i = 1; i < atoms.size(); ++i)
            if (atoms[i].type == atoms[i - 1].type) throw std::invalid_argument("duplicate type atom");
        for (TypeAtom& a : atoms) a.prob /= total;
        TypeLaw law;
        law.atoms_ = std::move(atoms);
        return law;
    }

    std::span<const TypeAtom> atoms() const& noexcept { return atoms_; }
    std::span<const TypeAtom> atoms() const&& = delete;
    std::size_t size() const noexcept { return atoms_.size(); }

    double prob_of(const SignedType& t) const noexcept {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), t.value(),
                                   [](const TypeAtom& a, double v) { return a.type.value() < v; });
        return it != atoms_.end() && it->type == t ? it->prob : 0.0;
    }

    double sign_prob(Spin s) const noexcept {
        double p = 0.0;
        for (const TypeAtom& a : atoms_)
            if (a.type.sign == s) p += a.prob;
        return p;
    }

    /// Law of |x|.
    WeightLaw weight_marginal() const {
        std::vector<Atom> w;
        w.reserve(atoms_.size());
        for (const TypeAtom& a : atoms_) w.push_back({a.type.weight, a.prob});
        return WeightLaw::from_atoms(w);
    }

private:
    TypeLaw() = default;
    std::vector<TypeAtom> atoms_;
};

/// Half the L1 distance; atoms are matched by type.
inline double total_variation(const TypeLaw& p, const TypeLaw& q) {
    auto pa = p.atoms();
    auto qa = q.atoms();
    double l1 = 0.0;
    std::size_t i = 0, j = 0;
    while (i < pa.size() || j < qa.size()) {
        if (j == qa.size() || (i < pa.size() && pa[i].type.value() < qa[j].type.value())) {
            l1 += pa[i++].prob;
        } else if (i == pa.size() || qa[j].type.value() < pa[i].type.value()) {
            l1 += qa[j++].prob;
        } else {
            l1 += std::abs(pa[i++].prob - qa[j++].prob);
        }
    }
    return 0.5 * l1;
}

/// Law mu of a vertex type: uniform sign, weight from the law.
inline TypeLaw base_type_law(const WeightLaw& law) {
    std::vector<TypeAtom> atoms;
    atoms.reserve(2 * law.size());
    for (const Atom& a : law.atoms()) {
        atoms.push_back({{Spin::minus, a.value}, 0.5 * a.prob});
        atoms.push_back({{Spin::plus, a.value}, 0.5 * a.prob});
    }
    return TypeLaw::from_masses(std::move(atoms));
}

/// Same as base_type_law but with size-biased weights.
inline TypeLaw size_biased_type_law(const WeightLaw& law) { return base_type_law(size_biased(law)); }

/// Offspring type law: mu tilted by kernel(x, .). Computed from the kernel
/// directly; it factorizes into an independent sign and a size-biased weight.
inline TypeLaw offspring_type_law(const SignedType& x, const ModelParams& params) {
    params.require_positive_total();
    const TypeLaw mu = base_type_law(params.law());
    std::vector<TypeAtom> atoms;
    atoms.reserve(mu.size());
    for (const TypeAtom& y : mu.atoms()) atoms.push_back({y.type, kernel(x, y.type, params) * y.prob});
    return TypeLaw::from_masses(std::move(atoms));
}

/// (a-b)^2 Phi2 / (2(a+b)). Reconstruction is impossible when this is <= 1.
inline double ks_threshold_stat(const ModelParams& params) {
    params.require_positive_total();
    const double d = params.a() - params.b();
    return d * d * params.law().m2() / (2.0 * (params.a() + params.b()));
}

/// Draws from a TypeLaw.
class TypeSampler {
public:
    explicit TypeSampler(const TypeLaw& law) : types_() {
        std::vector<double> p;
        for (const TypeAtom& a : law.atoms()) {
            types_.push_back(a.type);
            p.push_back(a.prob);
        }
        param_ = std::discrete_distribution<std::size_t>::param_type(p.begin(), p.end());
    }

    SignedType operator()(Rng& rng) const {
        std::discrete_distribution<std::size_t> dist;
        return types_[dist(rng, param_)];
    }

private:
    std::vector<SignedType> types_;
    std::discrete_distribution<std::size_t>::param_type param_;
};

}  // namespace dcppm
