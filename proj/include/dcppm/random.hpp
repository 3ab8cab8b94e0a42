#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dcppm {

using Rng = std::mt19937_64;
using Seed = std::uint64_t;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable 64-bit hash of (master, coords...). Independent of platform and
// call order, so per-cell / per-trial streams can be regenerated in isolation.
inline constexpr Seed derive_seed(Seed master, std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(Seed seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

}  // namespace dcppm
