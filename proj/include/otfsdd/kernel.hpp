// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fractional delay-Doppler spreading kernel.
//
// A path with total delay a = l_p + iota_p and total Doppler b = k_p + kappa_p
// spreads the pilot response over the grid as
//
//   alpha(dl, dk) = D_M(dl - a) * G_N(dk - b)
//   D_M(x) = (1/M) sum_{m=0}^{M-1} exp(+j 2 pi m x / M)
//   G_N(y) = (1/N) sum_{n=0}^{N-1} exp(-j 2 pi n y / N)
//
// Both factors are Dirichlet kernels, periodic in their argument with period M
// (resp. N), and reduce to a Kronecker delta for integer arguments.

#include "otfsdd/common.hpp"

#include <cmath>

namespace otfsdd {

namespace detail {

// Reduce x into [-n/2, n/2]; the kernels have period n.
inline double reduce_period(double x, int n) { return x - n * std::round(x / n); }

}  // namespace detail

/// Closed-form delay factor D_M(x), with the x = 0 (mod M) singularity taken by its limit.
inline cdouble dirichlet_delay(double x, int M) {
    const double xr = detail::reduce_period(x, M);
    if (xr == 0.0) return {1.0, 0.0};
    const double mag = std::sin(kPi * xr) / (M * std::sin(kPi * xr / M));
    return std::polar(mag, kPi * xr * (M - 1) / M);
}

/// Closed-form Doppler factor G_N(y) = conj(D_N(y)) for real y.
inline cdouble dirichlet_doppler(double y, int N) { return std::conj(dirichlet_delay(y, N)); }

/// Spreading coefficient at offset (dl, dk) from the transmitted bin.
inline cdouble kernel_alpha(int dl, int dk, double a, double b, int M, int N) {
    return dirichlet_delay(dl - a, M) * dirichlet_doppler(dk - b, N);
}

namespace direct {

// Term-by-term sums, kept as the reference for the closed form.

inline cdouble dirichlet_delay(double x, int M) {
    cdouble acc{0.0, 0.0};
    for (int m = 0; m < M; ++m) acc += std::polar(1.0, 2.0 * kPi * m * x / M);
    return acc / static_cast<double>(M);
}

inline cdouble dirichlet_doppler(double y, int N) {
    cdouble acc{0.0, 0.0};
    for (int n = 0; n < N; ++n) acc += std::polar(1.0, -2.0 * kPi * n * y / N);
    return acc / static_cast<double>(N);
}

inline cdouble kernel_alpha(int dl, int dk, double a, double b, int M, int N) {
    return dirichlet_delay(dl - a, M) * dirichlet_doppler(dk - b, N);
}

}  // namespace direct

}  // namespace otfsdd
