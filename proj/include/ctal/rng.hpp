#pragma once

// Seed derivation and small sampling helpers.
//
// Every random stream in the toolkit is a std::mt19937_64 seeded from a
// splitmix64-style mix of (master seed, tags...). The bounded draws below are
// implemented here rather than through std::uniform_int_distribution so that
// results do not depend on the standard library vendor.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace ctal {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a, used to turn stable string identifiers into seed tags.
inline constexpr std::uint64_t hash_tag(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed) noexcept { return splitmix64(seed); }

/// Mixes any number of tags into a child seed. Order matters.
template <class... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) noexcept {
    return derive_seed(splitmix64(seed ^ splitmix64(tag + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

/// Uniform integer in [0, n). n must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    // Rejection sampling on the top of the range keeps the draw unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound + 1) % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r > limit);
    return static_cast<std::size_t>(r % bound);
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform_real(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

/// min(k, population.size()) distinct elements, uniformly without replacement,
/// in draw order.
template <class T>
std::vector<T> sample_without_replacement(std::vector<T> population, std::size_t k, Rng& rng) {
    k = std::min(k, population.size());
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_index(rng, population.size() - i);
        std::swap(population[i], population[j]);
    }
    population.resize(k);
    return population;
}

}  // namespace ctal
