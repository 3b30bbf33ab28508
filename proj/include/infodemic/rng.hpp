#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace infodemic {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// The std distributions are implementation-defined; these keep draws
// identical across standard libraries.

/// Uniform integer in [0, bound). bound must be > 0.
inline std::uint64_t rand_below(Rng& rng, std::uint64_t bound) {
    const std::uint64_t limit = Rng::max() - Rng::max() % bound;
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % bound;
}

/// Uniform real in [0, 1) with 53 bits of randomness.
inline double rand_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rand_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace infodemic
