// SPDX-License-Identifier: Apache-2.0

#include "otfsdd/detect.hpp"
#include "otfsdd/frame.hpp"

#include <gtest/gtest.h>

using namespace otfsdd;

namespace {

GridConfig grid(int M, int N, int Mt, int Nn) {
    GridConfig g;
    g.M = M;
    g.N = N;
    g.M_tau = Mt;
    g.N_nu = Nn;
    g.N_cp = Mt;
    return g;
}

DDChannelMatrix dense(const CMatrix& h) { return DDChannelMatrix{h}; }

// Bit errors over `trials` perfect-CSI frames at each SNR, fixed bits and unit noise per trial.
std::vector<std::size_t> perfect_csi_errors(const GridConfig& g, const std::vector<double>& snr_db, int trials,
                                            std::uint64_t seed, std::size_t& bits_out) {
    const FrameLayout layout = build_layout(g);
    std::vector<std::size_t> errors(snr_db.size(), 0);
    bits_out = 0;
    for (int t = 0; t < trials; ++t) {
        Rng rng = child_stream(seed, static_cast<std::uint64_t>(t), StreamRole::generic);
        const CMatrix h = effective_channel_full(sample_paths(ChannelProfile{}, g, rng), g);
        std::vector<bool> bits(layout.data_positions.size());
        std::vector<cdouble> sym(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) sym[i] = bpsk_symbol(bits[i] = rng.bit());
        const CVector x = build_frame(layout, sym).data.reshaped();
        const CVector clean = build_hdd(h, g).entries * x;
        const CVector w = complex_gaussian(x.size(), 1, 1.0, rng).col(0);
        for (std::size_t s = 0; s < snr_db.size(); ++s) {
            const double sigma_sq = std::pow(10.0, -snr_db[s] / 10.0);
            const CVector xh = mmse_detect_circulant(clean + std::sqrt(sigma_sq) * w, h, g, sigma_sq, 1.0);
            errors[s] += demap_bpsk(read_data(layout, xh.reshaped(g.M, g.N)), bits).bit_errors;
        }
        bits_out += bits.size();
    }
    return errors;
}

}  // namespace

TEST(Mmse, TwoByTwoHandSolution) {
    CMatrix H = CMatrix::Zero(2, 2);
    H(0, 0) = 1.0;
    H(1, 1) = 2.0;
    CVector y(2);
    y << 1.0, 2.0;
    const CVector x = mmse_detect(y, dense(H), 1.0, 1.0);
    EXPECT_NEAR(std::abs(x(0) - 0.5), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(x(1) - 0.8), 0.0, 1e-14);
    // Same regulariser from a different sigma^2 / sigma_d^2 split.
    EXPECT_LE((mmse_detect(y, dense(H), 2.0, 2.0) - x).norm(), 1e-14);
}

TEST(Mmse, IdentityChannelNoiselessReturnsObservation) {
    Rng rng(81);
    const CVector y = complex_gaussian(16, 1, 1.0, rng);
    EXPECT_LE((mmse_detect(y, dense(CMatrix::Identity(16, 16)), 0.0, 1.0) - y).norm(), 1e-14);
    EXPECT_LE((mmse_detect(y, dense(CMatrix::Identity(16, 16)), 1e-12, 1.0) - y).norm(), 1e-10);
}

TEST(Mmse, ZeroRegularisationIsLeastSquares) {
    Rng rng(82);
    const CMatrix H = complex_gaussian(20, 12, 1.0, rng);
    const CVector y = complex_gaussian(20, 1, 1.0, rng);
    const CMatrix pinv = (H.adjoint() * H).inverse() * H.adjoint();
    EXPECT_LE((mmse_detect(y, dense(H), 0.0, 1.0) - pinv * y).norm(), 1e-8);
}

TEST(Mmse, CirculantFastPathMatchesDenseSolve) {
    const GridConfig g = grid(8, 8, 4, 4);
    Rng rng(83);
    for (double reg : {0.0, 1e-3, 0.5}) {
        const CMatrix h = complex_gaussian(8, 8, 1.0, rng);
        const CVector y = complex_gaussian(64, 1, 1.0, rng);
        const CVector a = mmse_detect(y, build_hdd(h, g), reg, 1.0);
        const CVector b = mmse_detect_circulant(y, h, g, reg, 1.0);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-9) << "reg=" << reg;
    }
}

TEST(Mmse, InputValidation) {
    const CMatrix H = CMatrix::Identity(4, 4);
    const CVector y = CVector::Ones(4);
    EXPECT_THROW(mmse_detect(CVector::Ones(3), dense(H), 0.1, 1.0), Error);
    EXPECT_THROW(mmse_detect(y, dense(H), 0.1, 0.0), Error);
    EXPECT_THROW(mmse_detect(y, dense(H), -0.1, 1.0), Error);
    CMatrix bad = H;
    bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
    try {
        mmse_detect(y, dense(bad), 0.1, 1.0);
        FAIL() << "non-finite channel accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::numeric);
    }
}

TEST(Mmse, PerfectCsiHighSnrIsErrorFree) {
    std::size_t bits = 0;
    const auto errors = perfect_csi_errors(grid(16, 16, 6, 6), {30.0}, 700, 5, bits);
    EXPECT_GE(bits, 10000u);
    EXPECT_EQ(errors[0], 0u);
}

TEST(Mmse, PerfectCsiBerIsMonotoneInSnr) {
    std::size_t bits = 0;
    const std::vector<double> snr{0, 5, 10, 15, 20, 25, 30};
    const auto errors = perfect_csi_errors(grid(16, 16, 6, 6), snr, 60, 6, bits);
    EXPECT_GT(errors.front(), 0u);
    for (std::size_t i = 1; i < errors.size(); ++i) EXPECT_LE(errors[i], errors[i - 1]) << "at " << snr[i] << " dB";
}

TEST(Demap, DecisionsAndTies) {
    EXPECT_TRUE(bpsk_decision({0.7, 0.0}));
    EXPECT_FALSE(bpsk_decision({-0.3, 5.0}));
    EXPECT_FALSE(bpsk_decision({0.0, 1.0}));
    EXPECT_FALSE(bpsk_decision({-0.0, 0.0}));
    EXPECT_EQ(bpsk_symbol(true), cdouble(1.0, 0.0));
    EXPECT_EQ(bpsk_symbol(false), cdouble(-1.0, 0.0));

    const std::vector<cdouble> sym{{0.7, 0}, {-0.3, 0}, {0.0, 0}, {2.0, 0}};
    const std::vector<bool> truth{true, true, false, false};
    const auto r = demap_bpsk(sym, truth);
    EXPECT_EQ(r.bits_hat, (std::vector<bool>{true, false, false, true}));
    EXPECT_EQ(r.bit_errors, 2u);
    EXPECT_DOUBLE_EQ(r.ber, 0.5);
    EXPECT_DOUBLE_EQ(r.ser, 0.5);
    EXPECT_THROW(demap_bpsk(sym, {true}), Error);
}

TEST(Nmse, ReferenceCases) {
    Rng rng(84);
    const CMatrix h = complex_gaussian(8, 8, 1.0, rng);
    EXPECT_EQ(nmse(h, h), 0.0);
    EXPECT_DOUBLE_EQ(nmse(CMatrix::Zero(8, 8), h), 1.0);
    EXPECT_NEAR(nmse(CMatrix(2.0 * h), h), 1.0, 1e-15);
    EXPECT_THROW(nmse(h, CMatrix::Zero(8, 8)), Error);
    EXPECT_THROW(nmse(h, CMatrix::Zero(4, 8)), Error);
}

TEST(Nmse, WindowAndFullMatrixAgree) {
    const GridConfig g = grid(8, 8, 4, 4);
    Rng rng(85);
    const CMatrix w = complex_gaussian(4, 4, 1.0, rng);
    const CMatrix w_hat = w + complex_gaussian(4, 4, 0.2, rng);
    const double window_level = nmse(w_hat, w);
    const double full_level = nmse(assemble_full_estimate({w_hat, "x"}, g), assemble_full_estimate({w, "x"}, g));
    EXPECT_NEAR(window_level, full_level, 1e-10);
}

TEST(Assemble, MatchesEmbedAndCirculantOracle) {
    const GridConfig g = grid(8, 8, 4, 4);
    Rng rng(86);
    const CMatrix w = complex_gaussian(4, 4, 1.0, rng);
    const DDChannelMatrix H = assemble_full_estimate({w, "x"}, g);
    // Oracle: window (u, v) sits at grid (u - G_L, v - N_nu/2) mod (M, N).
    CMatrix grid_h = CMatrix::Zero(8, 8);
    for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 4; ++v) grid_h((u - g.delay_back_margin + 8) % 8, (v - 2 + 8) % 8) = w(u, v);
    for (int rl = 0; rl < 8; ++rl)
        for (int rk = 0; rk < 8; ++rk)
            for (int cl = 0; cl < 8; ++cl)
                for (int ck = 0; ck < 8; ++ck)
                    ASSERT_EQ(H.entries(rl + 8 * rk, cl + 8 * ck), grid_h((rl - cl + 8) % 8, (rk - ck + 8) % 8));
}

TEST(Assemble, ExactWindowReproducesChannelAndZeroGivesZero) {
    const GridConfig g = reference_grid();
    ChannelProfile p;
    p.offsets = OffsetMode::integer;
    Rng rng(87);
    const PathSet set = sample_paths(p, g, rng);
    const CMatrix full = effective_channel_full(set, g);
    const DDChannelMatrix H = assemble_full_estimate({effective_channel_window(set, g), "perfect"}, g);
    EXPECT_LE((H.entries - build_hdd(full, g).entries).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(assemble_full_estimate({CMatrix::Zero(8, 8), "zero"}, g).entries.cwiseAbs().maxCoeff(), 0.0);
}
