// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/common.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace otfsdd {

/// Purpose tag mixed into child-stream keys so that, say, the channel draw of a
/// trial never shares an engine with its noise draw.
enum class StreamRole : std::uint64_t {
    channel = 1,
    pilot_noise = 2,
    data_bits = 3,
    data_noise = 4,
    parity = 5,
    generic = 6,
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Random stream with the draws this library needs. Owns its engine; copy to fork.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
    double normal() { return normal_(engine_); }
    bool bit() { return (engine_() >> 63) != 0; }

    /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    cdouble complex_normal(double variance) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal();
        const double im = normal();
        return {s * re, s * im};
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Child stream keyed by (master seed, salt, trial, role). The key, not the call
/// order, fixes the stream, so trials can run in any order or on any thread.
inline Rng child_stream(std::uint64_t master, std::uint64_t salt, std::uint64_t trial, StreamRole role) {
    using detail::splitmix64;
    std::uint64_t key = splitmix64(master);
    key = splitmix64(key ^ salt);
    key = splitmix64(key ^ trial);
    key = splitmix64(key ^ static_cast<std::uint64_t>(role));
    return Rng(key);
}

inline Rng child_stream(std::uint64_t master, std::uint64_t trial, StreamRole role) {
    return child_stream(master, 0, trial, role);
}

/// Fill a matrix with i.i.d. CN(0, variance) entries.
inline CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance, Rng& rng) {
    CMatrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = rng.complex_normal(variance);
    return out;
}

}  // namespace otfsdd
