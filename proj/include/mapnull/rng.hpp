#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace mapnull {

// Seeded random stream. Every randomized operation takes one of these by
// reference; there is no global generator.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based child seed: depends only on (parent, index), never on the
/// order in which children are requested.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept
{
    return mix64(mix64(parent) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform integer in [0, bound) by rejection; platform independent, unlike
/// std::uniform_int_distribution.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound)
{
    if (bound <= 1)
        return 0;
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound + 1) % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r > limit);
    return r % bound;
}

/// Fisher-Yates shuffle built on uniform_below.
template <typename T>
void shuffle(std::span<T> items, Rng& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng)
{
    shuffle(std::span<T>(items), rng);
}

inline double standard_normal(Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

} // namespace mapnull
