#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dcppm/random.hpp"

namespace dcppm {

inline constexpr double kZ95 = 1.959963984540054;

struct MeanCI {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;

    double standard_error() const noexcept { return count ? sd / std::sqrt(static_cast<double>(count)) : 0.0; }
};

/// Mean with a normal-approximation confidence interval of the mean.
inline MeanCI mean_ci(std::span<const double> xs, double z = kZ95) {
    if (xs.empty()) throw std::invalid_argument("mean of an empty sample");
    MeanCI r;
    r.count = xs.size();
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    const double half = z * r.standard_error();
    r.lo = r.mean - half;
    r.hi = r.mean + half;
    return r;
}

/// Samples of a discrete statistic grouped by trial. A trial contributes one
/// key for scalar statistics or several for pooled ones (e.g. one per child).
class KeyedSample {
public:
    void add_trial(std::span<const std::int64_t> keys) {
        keys_.insert(keys_.end(), keys.begin(), keys.end());
        offsets_.push_back(keys_.size());
    }
    void add_trial(std::int64_t key) { add_trial(std::span<const std::int64_t>(&key, 1)); }

    std::size_t trials() const noexcept { return offsets_.size() - 1; }
    std::size_t total() const noexcept { return keys_.size(); }
    std::span<const std::int64_t> trial(std::size_t t) const {
        return std::span<const std::int64_t>(keys_).subspan(offsets_[t], offsets_[t + 1] - offsets_[t]);
    }
    std::span<const std::int64_t> keys() const noexcept { return keys_; }

private:
    std::vector<std::int64_t> keys_;
    std::vector<std::size_t> offsets_{0};
};

struct TvEstimate {
    double tv = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

namespace detail {

inline double tv_from_counts(std::span<const double> x, double nx, std::span<const double> y, double ny) {
    if (nx == 0.0 && ny == 0.0) return 0.0;
    if (nx == 0.0 || ny == 0.0) return 1.0;
    double l1 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) l1 += std::abs(x[k] / nx - y[k] / ny);
    return 0.5 * l1;
}

}  // namespace detail

/// Plug-in total variation between the empirical laws of two samples.
inline double empirical_tv(const KeyedSample& x, const KeyedSample& y) {
    std::unordered_map<std::int64_t, std::size_t> bin;
    for (auto k : x.keys()) bin.try_emplace(k, bin.size());
    for (auto k : y.keys()) bin.try_emplace(k, bin.size());
    std::vector<double> cx(bin.size(), 0.0), cy(bin.size(), 0.0);
    for (auto k : x.keys()) cx[bin[k]] += 1.0;
    for (auto k : y.keys()) cy[bin[k]] += 1.0;
    return detail::tv_from_counts(cx, static_cast<double>(x.total()), cy, static_cast<double>(y.total()));
}

/// Plug-in TV with a percentile bootstrap interval. Trials are resampled
/// whole, each side independently.
inline TvEstimate bootstrap_tv(const KeyedSample& x, const KeyedSample& y, std::size_t resamples, Rng& rng,
                               double level = 0.95) {
    std::unordered_map<std::int64_t, std::size_t> bin;
    for (auto k : x.keys()) bin.try_emplace(k, bin.size());
    for (auto k : y.keys()) bin.try_emplace(k, bin.size());

    auto trial_bins = [&](const KeyedSample& s) {
        std::vector<std::vector<std::size_t>> out(s.trials());
        for (std::size_t t = 0; t < s.trials(); ++t)
            for (auto k : s.trial(t)) out[t].push_back(bin.at(k));
        return out;
    };
    const auto bx = trial_bins(x);
    const auto by = trial_bins(y);

    TvEstimate est;
    est.tv = empirical_tv(x, y);
    if (resamples == 0 || bx.empty() || by.empty()) {
        est.lo = est.hi = est.tv;
        return est;
    }

    std::vector<double> cx(bin.size()), cy(bin.size()), tvs;
    tvs.reserve(resamples);
    std::uniform_int_distribution<std::size_t> pick_x(0, bx.size() - 1), pick_y(0, by.size() - 1);
    for (std::size_t r = 0; r < resamples; ++r) {
        std::fill(cx.begin(), cx.end(), 0.0);
        std::fill(cy.begin(), cy.end(), 0.0);
        double nx = 0.0, ny = 0.0;
        for (std::size_t t = 0; t < bx.size(); ++t)
            for (std::size_t b : bx[pick_x(rng)]) cx[b] += 1.0, nx += 1.0;
        for (std::size_t t = 0; t < by.size(); ++t)
            for (std::size_t b : by[pick_y(rng)]) cy[b] += 1.0, ny += 1.0;
        tvs.push_back(detail::tv_from_counts(cx, nx, cy, ny));
    }
    std::sort(tvs.begin(), tvs.end());
    const double tail = 0.5 * (1.0 - level);
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(tvs.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < tvs.size() ? tvs[i] * (1.0 - frac) + tvs[i + 1] * frac : tvs[i];
    };
    est.lo = quantile(tail);
    est.hi = quantile(1.0 - tail);
    return est;
}

}  // namespace dcppm
