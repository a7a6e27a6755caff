// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/denoiser.hpp"
#include "otfsdd/frame.hpp"
#include "otfsdd/grid.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace otfsdd {

struct WindowEstimate {
    CMatrix window;
    std::string estimator_tag;
};

/// Keep Z[u,v] where |Z[u,v]| >= gamma * sigma, zero it otherwise.
inline WindowEstimate threshold_estimate(const CMatrix& z, double sigma, double gamma) {
    if (sigma < 0.0 || gamma < 0.0) throw config_error("threshold_estimate: sigma and gamma must be non-negative");
    const double cut = gamma * sigma;
    CMatrix out = z;
    for (Eigen::Index c = 0; c < out.cols(); ++c)
        for (Eigen::Index r = 0; r < out.rows(); ++r)
            if (std::abs(out(r, c)) < cut) out(r, c) = 0.0;
    return {std::move(out), "threshold"};
}

struct OmpResult {
    CVector coefficients;            // full-length, zero off the support
    std::vector<Eigen::Index> support;  // in selection order
    double residual_norm = 0.0;
};

/// Orthogonal matching pursuit of signal y over the columns of `dictionary`.
///
/// Each step picks the atom with the largest |<r, d>| (normalised by the atom
/// norm, lowest index on ties), refits all selected coefficients by least
/// squares and recomputes the residual. Stops after max_atoms selections or once
/// ||r|| <= residual_tol * ||y||.
inline OmpResult orthogonal_matching_pursuit(const CMatrix& dictionary, const CVector& y, int max_atoms,
                                             double residual_tol) {
    if (max_atoms < 1) throw config_error("OMP needs max_atoms >= 1");
    const Eigen::Index atoms = dictionary.cols();
    const Eigen::VectorXd norms = dictionary.colwise().norm().transpose();
    OmpResult res;
    res.coefficients = CVector::Zero(atoms);
    const double y_norm = y.norm();
    CVector residual = y;
    res.residual_norm = y_norm;
    if (y_norm == 0.0) return res;

    std::vector<bool> used(static_cast<std::size_t>(atoms), false);
    CVector fitted;
    const int limit = static_cast<int>(std::min<Eigen::Index>(max_atoms, atoms));
    for (int step = 0; step < limit && res.residual_norm > residual_tol * y_norm; ++step) {
        const CVector corr = dictionary.adjoint() * residual;
        Eigen::Index best = -1;
        double best_score = -1.0;
        for (Eigen::Index a = 0; a < atoms; ++a) {
            if (used[static_cast<std::size_t>(a)] || norms(a) == 0.0) continue;
            const double score = std::abs(corr(a)) / norms(a);
            if (score > best_score) {
                best_score = score;
                best = a;
            }
        }
        if (best < 0 || best_score == 0.0) break;
        used[static_cast<std::size_t>(best)] = true;
        res.support.push_back(best);

        CMatrix sub(dictionary.rows(), static_cast<Eigen::Index>(res.support.size()));
        for (std::size_t i = 0; i < res.support.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = dictionary.col(res.support[i]);
        fitted = sub.colPivHouseholderQr().solve(y);
        residual = y - sub * fitted;
        res.residual_norm = residual.norm();
    }
    for (std::size_t i = 0; i < res.support.size(); ++i) res.coefficients(res.support[i]) = fitted(static_cast<Eigen::Index>(i));
    return res;
}

/// OMP on the window over the integer-grid delta dictionary {e_{u,v}}.
inline WindowEstimate omp_estimate(const CMatrix& z, int max_atoms, double residual_tol = 0.0) {
    const Eigen::Index n = z.size();
    const CMatrix dictionary = CMatrix::Identity(n, n);
    const CVector y = z.reshaped();
    const auto res = orthogonal_matching_pursuit(dictionary, y, max_atoms, residual_tol);
    CMatrix out = (dictionary * res.coefficients).reshaped(z.rows(), z.cols());
    return {std::move(out), "omp"};
}

inline WindowEstimate denoise_estimate(const DenoiserModel& model, const CMatrix& z) {
    return {denoise(model, z), "denoise"};
}

/// Denoise every snapshot independently, then average the denoised windows.
inline WindowEstimate multi_frame_estimate(const DenoiserModel& model, const SnapshotSet& snapshots) {
    if (snapshots.frames.empty()) throw config_error("multi_frame_estimate: no frames");
    std::vector<CMatrix> denoised;
    denoised.reserve(snapshots.frames.size());
    for (const auto& z : snapshots.frames) denoised.push_back(denoise(model, z));
    return {average_frames(denoised), "denoise-avg"};
}

}  // namespace otfsdd
