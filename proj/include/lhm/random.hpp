#pragma once

#include <cstdint>
#include <random>

namespace lhm {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream) pairs. Used to give every walker,
// trial and shuffle its own generator so results do not depend on the
// order in which work is scheduled.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6c686du};
    return Rng(seq);
}

// splitmix64 finalizer; maps (seed, tag) to a well-mixed sub-seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag)
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace lhm
