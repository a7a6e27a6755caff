// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/common.hpp"

#include <fmt/format.h>

#include <vector>

namespace otfsdd {

/// OTFS grid geometry and physical parameters.
///
/// M delay bins by N Doppler bins, with the pilot observation window spanning
/// M_tau x N_nu bins around the pilot at (0, 0).
struct GridConfig {
    int M = 32;
    int N = 32;
    double delta_f = 15e3;  // Hz
    double f_c = 4e9;       // Hz
    int M_tau = 8;
    int N_nu = 8;
    int N_cp = 8;
    int F = 5;
    int delay_back_margin = 1;  // window rows kept before the pilot delay, see WindowIndexMap

    double symbol_period() const { return 1.0 / delta_f; }          // T
    double frame_duration() const { return N * symbol_period(); }   // T_f
    double bandwidth() const { return M * delta_f; }               // B
    double delay_resolution() const { return 1.0 / bandwidth(); }
    double doppler_resolution() const { return 1.0 / frame_duration(); }
    double sample_period() const { return symbol_period() / M; }
    int grid_size() const { return M * N; }
    int window_size() const { return M_tau * N_nu; }

    void validate() const {
        if (M <= 0 || N <= 0 || M_tau <= 0 || N_nu <= 0 || N_cp < 0 || F <= 0)
            throw config_error("grid counts must be positive");
        if (!(delta_f > 0.0) || !(f_c > 0.0))
            throw config_error("delta_f and f_c must be positive");
        if (M < 2 * M_tau || N < 2 * N_nu)
            throw config_error(fmt::format("guard regions do not fit: need M >= 2*M_tau and N >= 2*N_nu "
                                           "(M={}, N={}, M_tau={}, N_nu={})",
                                           M, N, M_tau, N_nu));
        if (delay_back_margin < 0 || delay_back_margin >= M_tau)
            throw config_error(fmt::format("delay_back_margin={} must lie in [0, M_tau)", delay_back_margin));
        if (N_cp < M_tau - 1)
            throw config_error(fmt::format("N_cp={} does not cover the delay spread M_tau-1={}", N_cp, M_tau - 1));
    }
};

/// Reference simulation parameters (N_cp defaults to M_tau).
inline GridConfig reference_grid() { return GridConfig{}; }

inline int wrap_index(int i, int n) {
    const int r = i % n;
    return r < 0 ? r + n : r;
}

/// (delay, Doppler) index into an M x N grid.
struct GridIndex {
    int l = 0;
    int k = 0;
    friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Placement of the M_tau x N_nu observation window on the grid.
///
/// Row u maps to delay (u - G_L) mod M, column v to Doppler (v - N_nu/2) mod N, so
/// the Doppler axis is circularly centred on the pilot. G_L rows catch back-leakage
/// that wraps to l = M-1, ...; the default G_L = 1 is the largest margin that still
/// covers integer delays up to M_tau-2.
class WindowIndexMap {
public:
    explicit WindowIndexMap(const GridConfig& cfg)
        : M_(cfg.M), N_(cfg.N), rows_(cfg.M_tau), cols_(cfg.N_nu), margin_(cfg.delay_back_margin) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int delay_index(int u) const { return wrap_index(delay_offset(u), M_); }
    int doppler_index(int v) const { return wrap_index(doppler_offset(v), N_); }
    GridIndex operator()(int u, int v) const { return {delay_index(u), doppler_index(v)}; }

    // Signed offsets from the pilot; the kernel is periodic so these are interchangeable
    // with the wrapped indices.
    int delay_offset(int u) const { return u - margin_; }
    int doppler_offset(int v) const { return v - cols_ / 2; }

    std::vector<GridIndex> entries() const {
        std::vector<GridIndex> out;
        out.reserve(static_cast<std::size_t>(rows_ * cols_));
        for (int v = 0; v < cols_; ++v)
            for (int u = 0; u < rows_; ++u) out.push_back((*this)(u, v));
        return out;
    }

private:
    int M_, N_, rows_, cols_, margin_;
};

inline WindowIndexMap window_index_map(const GridConfig& cfg) { return WindowIndexMap(cfg); }

/// Sample an M x N grid at the window positions.
inline CMatrix crop_window(const CMatrix& grid, const GridConfig& cfg) {
    const auto map = window_index_map(cfg);
    CMatrix w(map.rows(), map.cols());
    for (int v = 0; v < map.cols(); ++v)
        for (int u = 0; u < map.rows(); ++u) {
            const auto [l, k] = map(u, v);
            w(u, v) = grid(l, k);
        }
    return w;
}

/// Inverse of crop_window: place a window into an otherwise zero M x N grid.
inline CMatrix embed_window(const CMatrix& window, const GridConfig& cfg) {
    const auto map = window_index_map(cfg);
    if (window.rows() != map.rows() || window.cols() != map.cols())
        throw config_error(fmt::format("window is {}x{}, expected {}x{}", window.rows(), window.cols(), map.rows(),
                                       map.cols()));
    CMatrix grid = CMatrix::Zero(cfg.M, cfg.N);
    for (int v = 0; v < map.cols(); ++v)
        for (int u = 0; u < map.rows(); ++u) {
            const auto [l, k] = map(u, v);
            grid(l, k) = window(u, v);
        }
    return grid;
}

}  // namespace otfsdd
