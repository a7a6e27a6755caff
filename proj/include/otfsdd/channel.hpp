// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/grid.hpp"
#include "otfsdd/kernel.hpp"
#include "otfsdd/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace otfsdd {

/// One propagation path. Delay tau = (l + iota)/(M delta_f), Doppler nu = (k + kappa)/(N T).
struct Path {
    cdouble gain{1.0, 0.0};
    int delay_index = 0;
    double delay_offset = 0.0;  // iota in (-1/2, 1/2)
    int doppler_index = 0;      // signed
    double doppler_offset = 0.0;  // kappa in (-1/2, 1/2)

    double total_delay() const { return delay_index + delay_offset; }
    double total_doppler() const { return doppler_index + doppler_offset; }
};

struct PathSet {
    std::vector<Path> paths;

    std::size_t size() const { return paths.size(); }
    double total_power() const {
        double p = 0.0;
        for (const auto& path : paths) p += std::norm(path.gain);
        return p;
    }
};

/// Throws if the path set would leak outside the M_tau x N_nu observation window support.
inline void validate_support(const PathSet& set, const GridConfig& cfg) {
    const int k_max = cfg.N_nu / 2 - 1;
    for (std::size_t i = 0; i < set.paths.size(); ++i) {
        const auto& p = set.paths[i];
        if (p.delay_index < 0 || p.delay_index > cfg.M_tau - 2)
            throw config_error(fmt::format("path {}: delay index {} outside [0, {}]", i, p.delay_index, cfg.M_tau - 2));
        if (std::abs(p.doppler_index) > k_max)
            throw config_error(
                fmt::format("path {}: Doppler index {} outside [{}, {}]", i, p.doppler_index, -k_max, k_max));
        if (!(std::abs(p.delay_offset) < 0.5) || !(std::abs(p.doppler_offset) < 0.5))
            throw config_error(fmt::format("path {}: fractional offsets must lie in (-0.5, 0.5)", i));
        for (std::size_t j = 0; j < i; ++j) {
            const auto& q = set.paths[j];
            if (q.delay_index == p.delay_index && q.doppler_index == p.doppler_index)
                throw config_error(fmt::format("paths {} and {} share integer tap ({}, {})", j, i, p.delay_index,
                                               p.doppler_index));
        }
    }
}

/// Which offsets are drawn off-grid.
enum class OffsetMode {
    integer,             // iota = kappa = 0
    fractional_doppler,  // kappa ~ U(-1/2, 1/2), iota = 0
    fdfd,                // both fractional
};

inline OffsetMode parse_offset_mode(const std::string& s) {
    if (s == "integer") return OffsetMode::integer;
    if (s == "fractional-doppler") return OffsetMode::fractional_doppler;
    if (s == "fdfd") return OffsetMode::fdfd;
    throw config_error("unknown offset mode '" + s + "' (expected integer, fractional-doppler or fdfd)");
}

inline std::string to_string(OffsetMode m) {
    switch (m) {
        case OffsetMode::integer: return "integer";
        case OffsetMode::fractional_doppler: return "fractional-doppler";
        case OffsetMode::fdfd: return "fdfd";
    }
    return "?";
}

struct ChannelProfile {
    int num_paths = 5;
    OffsetMode offsets = OffsetMode::fdfd;
    double decay_db_per_delay_bin = 0.0;  // 0 gives equal-power paths
};

/// Draw a random path set: CN(0, p_i) gains with sum p_i = 1 (equal power unless a
/// per-delay-bin decay is set), integer taps sampled without replacement on each
/// axis, fractional offsets uniform on (-1/2, 1/2).
inline PathSet sample_paths(const ChannelProfile& profile, const GridConfig& cfg, Rng& rng) {
    const int P = profile.num_paths;
    const int k_max = cfg.N_nu / 2 - 1;
    const int delay_choices = cfg.M_tau - 1;
    const int doppler_choices = 2 * k_max + 1;
    if (P < 1) throw config_error("channel needs at least one path");
    if (P > delay_choices || P > doppler_choices)
        throw config_error(fmt::format("P={} paths need {} distinct delay and Doppler taps; window offers {} and {}", P,
                                       P, delay_choices, doppler_choices));

    std::vector<int> delays(delay_choices);
    std::iota(delays.begin(), delays.end(), 0);
    std::vector<int> dopplers(doppler_choices);
    std::iota(dopplers.begin(), dopplers.end(), -k_max);
    // Partial Fisher-Yates with explicit draws, so the result does not depend on std::shuffle.
    auto draw = [&rng](std::vector<int>& pool, int count) {
        for (int i = 0; i < count; ++i) {
            const int j = rng.uniform_int(i, static_cast<int>(pool.size()) - 1);
            std::swap(pool[i], pool[j]);
        }
    };
    draw(delays, P);
    draw(dopplers, P);

    // Open interval (-1/2, 1/2); uniform_real_distribution can return its lower bound.
    auto offset = [&rng] {
        double u = rng.uniform(-0.5, 0.5);
        while (u <= -0.5) u = rng.uniform(-0.5, 0.5);
        return u;
    };

    std::vector<double> power(P);
    for (int p = 0; p < P; ++p) power[p] = std::pow(10.0, -profile.decay_db_per_delay_bin * delays[p] / 10.0);
    const double total = std::accumulate(power.begin(), power.end(), 0.0);

    PathSet set;
    set.paths.reserve(P);
    for (int p = 0; p < P; ++p) {
        Path path;
        path.gain = rng.complex_normal(power[p] / total);
        path.delay_index = delays[p];
        path.doppler_index = dopplers[p];
        if (profile.offsets == OffsetMode::fdfd) path.delay_offset = offset();
        if (profile.offsets != OffsetMode::integer) path.doppler_offset = offset();
        set.paths.push_back(path);
    }
    return set;
}

/// H_eff restricted to the observation window, optionally with the full M x N grid.
struct EffectiveChannel {
    CMatrix window;
    std::optional<CMatrix> full_grid;
};

enum class ChannelScope { window, full };

namespace detail {

// Coherent sum over paths at pilot-relative offset (dl, dk).
inline cdouble effective_tap(const PathSet& set, int dl, int dk, const GridConfig& cfg) {
    cdouble acc{0.0, 0.0};
    for (const auto& p : set.paths)
        acc += p.gain * kernel_alpha(dl, dk, p.total_delay(), p.total_doppler(), cfg.M, cfg.N);
    return acc;
}

}  // namespace detail

inline CMatrix effective_channel_full(const PathSet& set, const GridConfig& cfg) {
    CMatrix full(cfg.M, cfg.N);
    for (int k = 0; k < cfg.N; ++k)
        for (int l = 0; l < cfg.M; ++l) full(l, k) = detail::effective_tap(set, l, k, cfg);
    return full;
}

inline CMatrix effective_channel_window(const PathSet& set, const GridConfig& cfg) {
    const auto map = window_index_map(cfg);
    CMatrix w(map.rows(), map.cols());
    for (int v = 0; v < map.cols(); ++v)
        for (int u = 0; u < map.rows(); ++u)
            w(u, v) = detail::effective_tap(set, map.delay_offset(u), map.doppler_offset(v), cfg);
    return w;
}

inline EffectiveChannel effective_channel(const PathSet& set, const GridConfig& cfg, ChannelScope scope) {
    if (scope == ChannelScope::window) {
        validate_support(set, cfg);
        return {effective_channel_window(set, cfg), std::nullopt};
    }
    CMatrix full = effective_channel_full(set, cfg);
    CMatrix window = crop_window(full, cfg);
    return {std::move(window), std::move(full)};
}

/// Dense MN x MN DD-domain channel; row/column index l + M*k.
struct DDChannelMatrix {
    CMatrix entries;
};

inline Eigen::Index vec_index(int l, int k, int M) { return static_cast<Eigen::Index>(l) + static_cast<Eigen::Index>(M) * k; }

/// 2-D circulant built from the full effective channel: entry ((l',k'),(l,k)) is
/// H_eff((l'-l) mod M, (k'-k) mod N).
inline DDChannelMatrix build_hdd(const CMatrix& h_eff_full, const GridConfig& cfg) {
    if (h_eff_full.rows() != cfg.M || h_eff_full.cols() != cfg.N)
        throw config_error(fmt::format("effective channel is {}x{}, expected {}x{}", h_eff_full.rows(),
                                       h_eff_full.cols(), cfg.M, cfg.N));
    const int M = cfg.M;
    const int N = cfg.N;
    DDChannelMatrix out{CMatrix(M * N, M * N)};
    for (int k = 0; k < N; ++k)
        for (int l = 0; l < M; ++l) {
            const auto col = vec_index(l, k, M);
            for (int kp = 0; kp < N; ++kp)
                for (int lp = 0; lp < M; ++lp)
                    out.entries(vec_index(lp, kp, M), col) = h_eff_full(wrap_index(lp - l, M), wrap_index(kp - k, N));
        }
    return out;
}

}  // namespace otfsdd
