#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

// Counter-based random numbers: every draw is a pure function of a 64-bit
// key, so parallel consumers get identical streams regardless of schedule.

namespace ropepp::rng {

// SplitMix64 finalizer.
constexpr std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a) {
    return mix(seed + 0x9e3779b97f4a7c15ull + mix(a));
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return key(key(seed, a), b);
}

constexpr std::uint64_t key(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return key(key(seed, a, b), c);
}

// Uniform in (0, 1]: top 53 bits of the mixed key, never zero.
inline double uniform01(std::uint64_t k) {
    return static_cast<double>((mix(k) >> 11) + 1) * 0x1.0p-53;
}

struct GaussPair {
    double z0;
    double z1;
};

// Box-Muller on two decorrelated uniforms derived from one key.
inline GaussPair gaussian_pair(std::uint64_t k) {
    const double u1 = uniform01(k);
    const double u2 = uniform01(k ^ 0xd1342543de82ef95ull);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(a), r * std::sin(a)};
}

inline double gaussian(std::uint64_t k) {
    return gaussian_pair(k).z0;
}

} // namespace ropepp::rng
