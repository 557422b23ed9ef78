#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace ctwist {

using complex = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

// log of the binomial coefficient C(n, k), exact enough for amplitude work at
// any n this library meets (lgamma is exact to ~1 ulp of the log).
inline double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// FNV-1a 64-bit hash, used for output-file checksums in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace ctwist
