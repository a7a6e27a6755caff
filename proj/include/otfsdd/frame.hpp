// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/channel.hpp"
#include "otfsdd/grid.hpp"
#include "otfsdd/modem.hpp"
#include "otfsdd/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace otfsdd {

/// Classification of a grid bin in the embedded-pilot frame.
enum class BinClass : std::uint8_t { pilot, guard_int, guard_nu, guard_tau, data };

/// Embedded-pilot frame layout: pilot at (0, 0), zero guards, data elsewhere.
///
/// The three guard sets overlap as written in closed form (shared rows and
/// columns at M_tau-1, M-M_tau, N_nu-1, N-N_nu, and the pilot itself). Each bin is
/// assigned to the first set that contains it, in the order pilot, G_int, G_nu,
/// G_tau, so the stored sets partition the grid.
struct FrameLayout {
    int M = 0;
    int N = 0;
    double pilot_amplitude = 1.0;
    std::vector<GridIndex> guard_int;
    std::vector<GridIndex> guard_nu;
    std::vector<GridIndex> guard_tau;
    std::vector<GridIndex> data_positions;  // column-major scan order (l fastest)

    GridIndex pilot() const { return {0, 0}; }
    std::size_t guard_count() const { return guard_int.size() + guard_nu.size() + guard_tau.size(); }
};

namespace detail {

inline bool in_range(int i, int lo, int hi) { return i >= lo && i <= hi; }

// Closed-form membership, before precedence is applied.
inline bool in_guard_int(int l, int k, const GridConfig& c) {
    return (in_range(l, 0, c.M_tau - 1) || in_range(l, c.M - c.M_tau, c.M - 1)) &&
           (in_range(k, 0, c.N_nu - 1) || in_range(k, c.N - c.N_nu, c.N - 1));
}
inline bool in_guard_nu(int l, int k, const GridConfig& c) {
    return (in_range(l, 0, c.M_tau - 1) || in_range(l, c.M - c.M_tau, c.M - 1)) &&
           in_range(k, c.N_nu - 1, c.N - c.N_nu);
}
inline bool in_guard_tau(int l, int k, const GridConfig& c) {
    return in_range(l, c.M_tau - 1, c.M - c.M_tau) &&
           (in_range(k, 0, c.N_nu - 1) || in_range(k, c.N - c.N_nu, c.N - 1));
}

}  // namespace detail

inline BinClass classify_bin(int l, int k, const GridConfig& cfg) {
    if (l == 0 && k == 0) return BinClass::pilot;
    if (detail::in_guard_int(l, k, cfg)) return BinClass::guard_int;
    if (detail::in_guard_nu(l, k, cfg)) return BinClass::guard_nu;
    if (detail::in_guard_tau(l, k, cfg)) return BinClass::guard_tau;
    return BinClass::data;
}

inline FrameLayout build_layout(const GridConfig& cfg, double pilot_amplitude = 1.0) {
    cfg.validate();
    if (!(pilot_amplitude > 0.0)) throw config_error("pilot amplitude must be positive");
    FrameLayout layout;
    layout.M = cfg.M;
    layout.N = cfg.N;
    layout.pilot_amplitude = pilot_amplitude;
    for (int k = 0; k < cfg.N; ++k)
        for (int l = 0; l < cfg.M; ++l) {
            switch (classify_bin(l, k, cfg)) {
                case BinClass::pilot: break;
                case BinClass::guard_int: layout.guard_int.push_back({l, k}); break;
                case BinClass::guard_nu: layout.guard_nu.push_back({l, k}); break;
                case BinClass::guard_tau: layout.guard_tau.push_back({l, k}); break;
                case BinClass::data: layout.data_positions.push_back({l, k}); break;
            }
        }
    return layout;
}

/// Pilot at (0,0), zero guards, data symbols placed in data_positions order.
inline DDGrid build_frame(const FrameLayout& layout, std::span<const cdouble> data_symbols) {
    if (data_symbols.size() != layout.data_positions.size())
        throw config_error(fmt::format("frame has {} data positions, got {} symbols", layout.data_positions.size(),
                                       data_symbols.size()));
    DDGrid grid{CMatrix::Zero(layout.M, layout.N), GridRole::tx_symbols};
    grid.data(0, 0) = layout.pilot_amplitude;
    for (std::size_t i = 0; i < data_symbols.size(); ++i) {
        const auto [l, k] = layout.data_positions[i];
        grid.data(l, k) = data_symbols[i];
    }
    return grid;
}

inline std::vector<cdouble> read_data(const FrameLayout& layout, const CMatrix& grid) {
    std::vector<cdouble> out;
    out.reserve(layout.data_positions.size());
    for (const auto [l, k] : layout.data_positions) out.push_back(grid(l, k));
    return out;
}

/// Pilot observation window of a received frame, normalised by the pilot amplitude.
inline CMatrix extract_observation(const DDGrid& y_dd, const FrameLayout& layout, const GridConfig& cfg) {
    if (!(layout.pilot_amplitude != 0.0)) throw numeric_error("pilot amplitude is zero");
    return crop_window(y_dd.data, cfg) / layout.pilot_amplitude;
}

/// Noise variance sigma^2 = sigma_p^2 10^(-PSNR/10); +inf PSNR gives 0.
inline double noise_variance_for_psnr(double psnr_db, double pilot_amplitude = 1.0) {
    if (std::isinf(psnr_db) && psnr_db > 0) return 0.0;
    return pilot_amplitude * pilot_amplitude * std::pow(10.0, -psnr_db / 10.0);
}

/// F pilot-normalised noisy snapshots of one fixed channel realisation.
struct SnapshotSet {
    std::vector<CMatrix> frames;
    double psnr_db = 0.0;
    std::uint64_t channel_ref = 0;
    CMatrix clean;  // H_eff window the frames observe

    std::size_t size() const { return frames.size(); }
};

/// Frame f = H_eff window + W_f / sigma_p with W_f i.i.d. CN(0, sigma^2).
inline SnapshotSet generate_snapshots(const CMatrix& h_eff_window, int num_frames, double psnr_db, Rng& rng,
                                      double pilot_amplitude = 1.0) {
    if (num_frames < 1) throw config_error("snapshot count must be at least 1");
    const double sigma_sq = noise_variance_for_psnr(psnr_db, pilot_amplitude);
    const double normalised = sigma_sq / (pilot_amplitude * pilot_amplitude);
    SnapshotSet set;
    set.psnr_db = psnr_db;
    set.clean = h_eff_window;
    set.frames.reserve(static_cast<std::size_t>(num_frames));
    for (int f = 0; f < num_frames; ++f) {
        CMatrix frame = h_eff_window;
        if (normalised > 0.0) frame += complex_gaussian(frame.rows(), frame.cols(), normalised, rng);
        set.frames.push_back(std::move(frame));
    }
    return set;
}

inline SnapshotSet generate_snapshots(const PathSet& paths, const GridConfig& cfg, double psnr_db, Rng& rng,
                                      std::uint64_t channel_ref = 0) {
    auto set = generate_snapshots(effective_channel_window(paths, cfg), cfg.F, psnr_db, rng);
    set.channel_ref = channel_ref;
    return set;
}

/// Elementwise mean of equally-shaped windows.
inline CMatrix average_frames(std::span<const CMatrix> frames) {
    if (frames.empty()) throw config_error("average_frames: empty frame set");
    CMatrix acc = frames.front();
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].rows() != acc.rows() || frames[i].cols() != acc.cols())
            throw config_error("average_frames: frames differ in shape");
        acc += frames[i];
    }
    return acc / static_cast<double>(frames.size());
}

}  // namespace otfsdd
