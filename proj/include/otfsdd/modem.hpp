// SPDX-License-Identifier: Apache-2.0
#pragma once

// OTFS modulation with rectangular pulses (G_tx = G_rx = I), unitary DFTs and a
// single cyclic prefix per frame.

#include "otfsdd/channel.hpp"
#include "otfsdd/grid.hpp"
#include "otfsdd/rng.hpp"

#include <fmt/format.h>
#include <unsupported/Eigen/FFT>

#include <vector>

namespace otfsdd {

enum class GridRole { tx_symbols, rx_symbols, channel_response };

struct DDGrid {
    CMatrix data;
    GridRole role = GridRole::tx_symbols;
};

/// Time-domain frame; samples are vec(S) column-major, optionally preceded by the CP.
struct TimeSignal {
    CVector samples;
    bool has_cp = false;
    int cp_length = 0;
    double sample_period = 0.0;  // T/M seconds
};

/// Unitary DFT matrix, F(a, b) = exp(-j 2 pi a b / n) / sqrt(n).
inline CMatrix dft_matrix(int n) {
    CMatrix F(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            // Reduce the exponent exactly before forming the angle.
            const long long e = (static_cast<long long>(a) * b) % n;
            F(a, b) = std::polar(scale, -2.0 * kPi * static_cast<double>(e) / n);
        }
    return F;
}

namespace detail {

inline void check_grid(const CMatrix& X, const GridConfig& cfg, const char* what) {
    if (X.rows() != cfg.M || X.cols() != cfg.N)
        throw config_error(fmt::format("{}: grid is {}x{}, expected {}x{}", what, X.rows(), X.cols(), cfg.M, cfg.N));
}

}  // namespace detail

/// X_TF = F_M X_DD F_N^H.
inline CMatrix isfft(const DDGrid& x_dd, const GridConfig& cfg) {
    detail::check_grid(x_dd.data, cfg, "isfft");
    return dft_matrix(cfg.M) * x_dd.data * dft_matrix(cfg.N).adjoint();
}

/// Y_DD = F_M^H Y_TF F_N.
inline DDGrid sfft(const CMatrix& y_tf, const GridConfig& cfg) {
    detail::check_grid(y_tf, cfg, "sfft");
    return {dft_matrix(cfg.M).adjoint() * y_tf * dft_matrix(cfg.N), GridRole::rx_symbols};
}

inline TimeSignal add_cp(const CVector& frame, int cp_length, double sample_period) {
    const auto L = frame.size();
    TimeSignal out;
    out.samples.resize(L + cp_length);
    out.samples.head(cp_length) = frame.tail(cp_length);
    out.samples.tail(L) = frame;
    out.has_cp = true;
    out.cp_length = cp_length;
    out.sample_period = sample_period;
    return out;
}

inline TimeSignal remove_cp(const TimeSignal& s) {
    if (!s.has_cp) return s;
    TimeSignal out;
    out.samples = s.samples.tail(s.samples.size() - s.cp_length);
    out.sample_period = s.sample_period;
    return out;
}

/// Heisenberg transform of the ISFFT output: s = vec(G_tx X_DD F_N^H) with the CP prepended.
inline TimeSignal modulate(const DDGrid& x_dd, const GridConfig& cfg) {
    detail::check_grid(x_dd.data, cfg, "modulate");
    const CMatrix S = x_dd.data * dft_matrix(cfg.N).adjoint();
    const CVector s = S.reshaped();
    return add_cp(s, cfg.N_cp, cfg.sample_period());
}

/// Time-domain channel r = sum_p h_p Delta_{nu_p} Pi_{tau_p} s.
///
/// The circular delay by l + iota samples is a linear phase over the DFT bins of
/// the CP-stripped MN-sample block; the Doppler phase exp(j 2 pi (k+kappa) n / (MN))
/// counts n from the first post-CP sample, so CP samples carry negative n.
inline TimeSignal apply_td_channel(const TimeSignal& s, const PathSet& paths, const GridConfig& cfg) {
    const TimeSignal body = remove_cp(s);
    const int L = cfg.grid_size();
    if (body.samples.size() != L)
        throw config_error(fmt::format("apply_td_channel: frame has {} samples, expected {}", body.samples.size(), L));
    const int cp = s.has_cp ? s.cp_length : 0;

    Eigen::FFT<double> fft;
    std::vector<cdouble> time(body.samples.data(), body.samples.data() + L);
    std::vector<cdouble> spectrum;
    fft.fwd(spectrum, time);

    CVector out = CVector::Zero(L + cp);
    std::vector<cdouble> shifted_spec(L);
    std::vector<cdouble> shifted;
    for (const auto& p : paths.paths) {
        const double delay = p.total_delay();
        for (int q = 0; q < L; ++q) {
            const double frac = std::fmod(static_cast<double>(q) * delay, static_cast<double>(L));
            shifted_spec[q] = spectrum[q] * std::polar(1.0, -2.0 * kPi * frac / L);
        }
        fft.inv(shifted, shifted_spec);
        const double doppler = p.total_doppler();
        for (int t = -cp; t < L; ++t) {
            const double frac = std::fmod(doppler * t, static_cast<double>(L));
            out(t + cp) += p.gain * std::polar(1.0, 2.0 * kPi * frac / L) * shifted[wrap_index(t, L)];
        }
    }
    TimeSignal r;
    r.samples = std::move(out);
    r.has_cp = s.has_cp;
    r.cp_length = cp;
    r.sample_period = s.sample_period;
    return r;
}

/// Discrete Wigner transform: Y_TF = F_M G_rx R.
inline CMatrix wigner(const CMatrix& R, const GridConfig& cfg) {
    detail::check_grid(R, cfg, "wigner");
    return dft_matrix(cfg.M) * R;
}

/// CP removal, Wigner transform and SFFT.
inline DDGrid demodulate(const TimeSignal& r, const GridConfig& cfg) {
    const TimeSignal body = remove_cp(r);
    if (body.samples.size() != cfg.grid_size())
        throw config_error(
            fmt::format("demodulate: frame has {} samples, expected {}", body.samples.size(), cfg.grid_size()));
    const CMatrix R = body.samples.reshaped(cfg.M, cfg.N);
    return sfft(wigner(R, cfg), cfg);
}

/// y = H_DD x + w with w ~ CN(0, sigma^2 I).
inline CVector dd_apply(const DDChannelMatrix& h_dd, const CVector& x, double sigma, Rng& rng) {
    if (h_dd.entries.cols() != x.size())
        throw config_error(fmt::format("dd_apply: channel has {} columns, vector has {} entries", h_dd.entries.cols(),
                                       x.size()));
    if (sigma < 0.0) throw config_error("dd_apply: sigma must be non-negative");
    CVector y = h_dd.entries * x;
    if (sigma > 0.0) y += complex_gaussian(y.size(), 1, sigma * sigma, rng);
    return y;
}

}  // namespace otfsdd
