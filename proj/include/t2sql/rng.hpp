#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace t2sql {

// std::uniform_int_distribution is implementation-defined, so seeded draws
// go through this helper to stay identical across standard libraries.
// mt19937_64 itself is fully specified.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    if (n <= 1) return 0;
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    return static_cast<std::size_t>(draw % bound);
}

// Derives an independent stream seed from a base seed and a small salt.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace t2sql
