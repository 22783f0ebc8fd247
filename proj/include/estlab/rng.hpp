#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace estlab {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream `index` of master seed `seed`. Replicate k always sees the same
// stream regardless of how replicates are spread over workers.
inline Rng make_stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL)));
}

// Uniform on [0, 1) with 53 random bits. Unlike std::uniform_real_distribution
// this is identical across standard library implementations.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (one value per call).
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double exponential(Rng& rng, double rate) {
    double u = uniform01(rng);
    while (u <= 0.0) {
        u = uniform01(rng);
    }
    return -std::log(u) / rate;
}

} // namespace estlab
