#pragma once

#include <cstdint>
#include <random>

namespace gedmd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; spreads nearby user seeds over the state space.
inline std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent stream `stream` of a run seeded with `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(seed)), static_cast<std::uint32_t>(splitmix64(seed) >> 32),
                      static_cast<std::uint32_t>(splitmix64(stream + 0x51ed27ULL)),
                      static_cast<std::uint32_t>(splitmix64(stream + 0x51ed27ULL) >> 32)};
    return Rng(seq);
}

}  // namespace gedmd
