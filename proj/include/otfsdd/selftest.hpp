// SPDX-License-Identifier: Apache-2.0
#pragma once

// Quick invariant checks run by `otfsdd selftest`. Each check is small enough
// to finish in well under a second.

#include "otfsdd/channel.hpp"
#include "otfsdd/denoiser.hpp"
#include "otfsdd/detect.hpp"
#include "otfsdd/estimators.hpp"
#include "otfsdd/frame.hpp"
#include "otfsdd/modem.hpp"

#include <fmt/format.h>

#include <functional>
#include <string>
#include <vector>

namespace otfsdd {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline std::vector<CheckResult> run_selftest(std::uint64_t seed = 7) {
    std::vector<CheckResult> out;
    auto check = [&out](std::string name, const std::function<std::pair<bool, std::string>()>& fn) {
        try {
            auto [ok, detail] = fn();
            out.push_back({std::move(name), ok, std::move(detail)});
        } catch (const std::exception& e) {
            out.push_back({std::move(name), false, e.what()});
        }
    };
    Rng rng(seed);

    check("kernel energy and closed form", [&] {
        double worst_energy = 0.0;
        double worst_form = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const int M = rng.uniform_int(2, 24);
            const int N = rng.uniform_int(2, 24);
            const double a = rng.uniform(-10, 10);
            const double b = rng.uniform(-10, 10);
            double e = 0.0;
            for (int dk = 0; dk < N; ++dk)
                for (int dl = 0; dl < M; ++dl) {
                    const cdouble k = kernel_alpha(dl, dk, a, b, M, N);
                    e += std::norm(k);
                    worst_form = std::max(worst_form, std::abs(k - direct::kernel_alpha(dl, dk, a, b, M, N)));
                }
            worst_energy = std::max(worst_energy, std::abs(e - 1.0));
        }
        return std::pair{worst_energy <= 1e-10 && worst_form <= 1e-12,
                         fmt::format("max |energy-1|={:.2e}, max |closed-direct|={:.2e}", worst_energy, worst_form)};
    });

    check("isfft/sfft round trip", [&] {
        GridConfig g;
        g.M = g.N = 16;
        g.M_tau = g.N_nu = 4;
        g.N_cp = 4;
        DDGrid x{complex_gaussian(16, 16, 1.0, rng), GridRole::tx_symbols};
        const double err = (sfft(isfft(x, g), g).data - x.data).cwiseAbs().maxCoeff();
        return std::pair{err <= 1e-10, fmt::format("max err {:.2e}", err)};
    });

    check("modem loopback", [&] {
        const GridConfig g = reference_grid();
        DDGrid x{complex_gaussian(g.M, g.N, 1.0, rng), GridRole::tx_symbols};
        const double err = (demodulate(modulate(x, g), g).data - x.data).cwiseAbs().maxCoeff();
        return std::pair{err <= 1e-10, fmt::format("max err {:.2e}", err)};
    });

    check("guard partition", [&] {
        for (auto [M, N, Mt, Nn] : {std::array{32, 32, 8, 8}, std::array{16, 16, 4, 4}}) {
            GridConfig g;
            g.M = M;
            g.N = N;
            g.M_tau = Mt;
            g.N_nu = Nn;
            g.N_cp = Mt;
            const auto layout = build_layout(g);
            if (1 + layout.guard_count() + layout.data_positions.size() != static_cast<std::size_t>(M * N))
                return std::pair{false, fmt::format("cardinalities do not cover {}x{}", M, N)};
        }
        return std::pair{true, std::string("sets cover the grid")};
    });

    check("circulant MMSE matches dense", [&] {
        GridConfig g;
        g.M = g.N = 8;
        g.M_tau = g.N_nu = 4;
        g.N_cp = 4;
        const CMatrix h = complex_gaussian(8, 8, 1.0, rng);
        const CVector y = complex_gaussian(64, 1, 1.0, rng);
        const double err =
            (mmse_detect(y, build_hdd(h, g), 0.1, 1.0) - mmse_detect_circulant(y, h, g, 0.1, 1.0)).cwiseAbs().maxCoeff();
        return std::pair{err <= 1e-9, fmt::format("max err {:.2e}", err)};
    });

    check("omp exact recovery", [&] {
        const GridConfig g = reference_grid();
        ChannelProfile p;
        p.offsets = OffsetMode::integer;
        const CMatrix h = effective_channel_window(sample_paths(p, g, rng), g);
        const double e = nmse(omp_estimate(h, 5).window, h);
        return std::pair{e <= 1e-20, fmt::format("nmse {:.2e}", e)};
    });

    check("reference parameter count", [] {
        const auto m = make_reference_model(13, 4);
        const auto n = m.parameter_count();
        return std::pair{n == 16265 && static_cast<long long>(n) == reference_parameter_count(13, 4),
                         fmt::format("{} parameters", n)};
    });

    return out;
}

}  // namespace otfsdd
