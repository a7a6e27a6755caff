// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/channel.hpp"
#include "otfsdd/estimators.hpp"
#include "otfsdd/modem.hpp"

#include <fmt/format.h>

#include <cmath>
#include <span>
#include <vector>

namespace otfsdd {

/// Zero-pad a window estimate back onto the M x N grid and build the circulant H_DD.
inline DDChannelMatrix assemble_full_estimate(const WindowEstimate& estimate, const GridConfig& cfg) {
    return build_hdd(embed_window(estimate.window, cfg), cfg);
}

namespace detail {

inline void check_finite(const CMatrix& m, const char* what) {
    if (!m.allFinite()) throw numeric_error(fmt::format("{}: non-finite input", what));
}

}  // namespace detail

/// x_hat solving (H^H H + (sigma^2 / sigma_d^2) I) x = H^H y by Cholesky of the
/// regularised Gram matrix. With zero regularisation this is least squares via
/// a pivoted QR of H.
inline CVector mmse_detect(const CVector& y, const DDChannelMatrix& h_hat, double sigma_sq, double sigma_d_sq) {
    const CMatrix& H = h_hat.entries;
    if (H.rows() != y.size()) throw config_error("mmse_detect: dimension mismatch");
    if (!(sigma_d_sq > 0.0)) throw config_error("mmse_detect: data power must be positive");
    if (sigma_sq < 0.0) throw config_error("mmse_detect: noise variance must be non-negative");
    detail::check_finite(H, "mmse_detect");
    if (!y.allFinite()) throw numeric_error("mmse_detect: non-finite observation");

    const double reg = sigma_sq / sigma_d_sq;
    if (reg == 0.0) return H.colPivHouseholderQr().solve(y);

    CMatrix gram = H.adjoint() * H;
    gram.diagonal().array() += reg;
    Eigen::LLT<CMatrix> llt(gram);
    if (llt.info() != Eigen::Success) throw numeric_error("mmse_detect: Gram matrix factorisation failed");
    CVector x = llt.solve(H.adjoint() * y);
    if (!x.allFinite()) throw numeric_error("mmse_detect: solution is not finite");
    return x;
}

/// Same MMSE solution for a 2-D circulant H_DD given by its generating M x N
/// grid, diagonalised by the 2-D DFT. Costs O(MN(M + N)) instead of O((MN)^3).
inline CVector mmse_detect_circulant(const CVector& y, const CMatrix& h_eff_full, const GridConfig& cfg,
                                     double sigma_sq, double sigma_d_sq) {
    if (h_eff_full.rows() != cfg.M || h_eff_full.cols() != cfg.N || y.size() != cfg.grid_size())
        throw config_error("mmse_detect_circulant: dimension mismatch");
    if (!(sigma_d_sq > 0.0)) throw config_error("mmse_detect_circulant: data power must be positive");
    detail::check_finite(h_eff_full, "mmse_detect_circulant");

    const CMatrix FM = dft_matrix(cfg.M);
    const CMatrix FN = dft_matrix(cfg.N);
    const double scale = std::sqrt(static_cast<double>(cfg.grid_size()));
    const CMatrix lambda = scale * (FM * h_eff_full * FN);   // eigenvalues of H_DD
    const CMatrix Y = FM * y.reshaped(cfg.M, cfg.N) * FN;
    const double reg = sigma_sq / sigma_d_sq;

    CMatrix X(cfg.M, cfg.N);
    for (int k = 0; k < cfg.N; ++k)
        for (int l = 0; l < cfg.M; ++l) {
            const cdouble lam = lambda(l, k);
            const double denom = std::norm(lam) + reg;
            X(l, k) = denom > 0.0 ? std::conj(lam) * Y(l, k) / denom : cdouble{0.0, 0.0};
        }
    const CMatrix x = FM.adjoint() * X * FN.adjoint();
    CVector out = x.reshaped();
    if (!out.allFinite()) throw numeric_error("mmse_detect_circulant: solution is not finite");
    return out;
}

/// BPSK mapping: bit 1 -> +1, bit 0 -> -1.
inline cdouble bpsk_symbol(bool bit) { return bit ? cdouble{1.0, 0.0} : cdouble{-1.0, 0.0}; }

/// Hard decision on the real part; a zero real part decides bit 0.
inline bool bpsk_decision(cdouble s) { return s.real() > 0.0; }

struct DetectionResult {
    std::vector<cdouble> symbols_hat;
    std::vector<bool> bits_hat;
    std::size_t bit_errors = 0;
    double ser = 0.0;
    double ber = 0.0;
};

inline DetectionResult demap_bpsk(std::span<const cdouble> symbols_hat, const std::vector<bool>& truth) {
    if (symbols_hat.size() != truth.size()) throw config_error("demap_bpsk: length mismatch");
    DetectionResult r;
    r.symbols_hat.assign(symbols_hat.begin(), symbols_hat.end());
    r.bits_hat.reserve(symbols_hat.size());
    for (std::size_t i = 0; i < symbols_hat.size(); ++i) {
        const bool b = bpsk_decision(symbols_hat[i]);
        r.bits_hat.push_back(b);
        if (b != truth[i]) ++r.bit_errors;
    }
    if (!truth.empty()) r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(truth.size());
    r.ser = r.ber;  // one bit per BPSK symbol
    return r;
}

/// ||H_hat - H||^2 / ||H||^2.
template <typename DA, typename DB>
double nmse(const Eigen::MatrixBase<DA>& h_hat, const Eigen::MatrixBase<DB>& h_true) {
    if (h_hat.rows() != h_true.rows() || h_hat.cols() != h_true.cols()) throw config_error("nmse: shape mismatch");
    const double ref = h_true.squaredNorm();
    if (!(ref > 0.0)) throw numeric_error("nmse: true channel has zero energy");
    return (h_hat - h_true).squaredNorm() / ref;
}

inline double nmse(const DDChannelMatrix& h_hat, const DDChannelMatrix& h_true) {
    return nmse(h_hat.entries, h_true.entries);
}

}  // namespace otfsdd
