// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace memxbar {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent stream for (master seed, index). A given pair always yields
/// the same sequence regardless of which thread consumes it.
inline Rng substream(std::uint64_t master, std::uint64_t index, std::uint64_t tag = 0)
{
    return Rng{mix64(mix64(master ^ mix64(tag)) + index)};
}

inline double standard_normal(Rng& rng)
{
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(rng);
}

inline double uniform(Rng& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(rng);
}

/// Zero-mean normal with standard deviation `limit / sigmas`, rejected outside
/// [-limit, +limit].
inline double truncated_normal(Rng& rng, double limit, double sigmas = 3.0)
{
    if (limit <= 0.0) {
        return 0.0;
    }
    const double sigma = limit / sigmas;
    for (;;) {
        const double e = sigma * standard_normal(rng);
        if (std::abs(e) <= limit) {
            return e;
        }
    }
}

}  // namespace memxbar
