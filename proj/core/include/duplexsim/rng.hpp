#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace duplexsim {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from one root seed. All randomness in
// the pipeline flows from a single root via this split.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Uniform double in [0, 1). Hand-rolled so results do not depend on the
// standard library's distribution implementation.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n).
inline int uniform_int(Rng& rng, int n) {
    return static_cast<int>(uniform_unit(rng) * n);
}

// Geometric number of failures with the given mean (>= 0).
inline int geometric(Rng& rng, double mean) {
    if (mean <= 0.0) return 0;
    const double p = 1.0 / (1.0 + mean);
    double u = uniform_unit(rng);
    if (u >= 1.0) u = 0.0;
    // inverse CDF of the geometric distribution on {0, 1, ...}
    return static_cast<int>(std::log1p(-u) / std::log1p(-p));
}

} // namespace duplexsim
