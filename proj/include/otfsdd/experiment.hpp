// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment harness: JSON configuration, seeded Monte-Carlo sweeps, dataset
// export and CSV emission. Every random draw comes from a child stream keyed by
// (seed, salt, trial, role), and per-trial results are reduced in trial order,
// so outputs do not depend on the worker count.

#include "otfsdd/channel.hpp"
#include "otfsdd/dataset_io.hpp"
#include "otfsdd/detect.hpp"
#include "otfsdd/estimators.hpp"
#include "otfsdd/frame.hpp"
#include "otfsdd/weights_io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace otfsdd {

// ---------------------------------------------------------------------------
// Estimator tags
// ---------------------------------------------------------------------------

enum class EstimatorTag { raw, avg, threshold, omp, denoise, denoise_avg, perfect };

inline std::string to_string(EstimatorTag t) {
    switch (t) {
        case EstimatorTag::raw: return "raw";
        case EstimatorTag::avg: return "avg";
        case EstimatorTag::threshold: return "threshold";
        case EstimatorTag::omp: return "omp";
        case EstimatorTag::denoise: return "denoise";
        case EstimatorTag::denoise_avg: return "denoise-avg";
        case EstimatorTag::perfect: return "perfect";
    }
    return "?";
}

inline EstimatorTag parse_estimator_tag(const std::string& s) {
    static const std::map<std::string, EstimatorTag> tags = {
        {"raw", EstimatorTag::raw},
        {"raw-single", EstimatorTag::raw},
        {"avg", EstimatorTag::avg},
        {"raw-averaged", EstimatorTag::avg},
        {"threshold", EstimatorTag::threshold},
        {"omp", EstimatorTag::omp},
        {"denoise", EstimatorTag::denoise},
        {"denoise-avg", EstimatorTag::denoise_avg},
        {"perfect", EstimatorTag::perfect},
    };
    const auto it = tags.find(s);
    if (it == tags.end()) throw config_error("unknown estimator tag '" + s + "'");
    return it->second;
}

inline bool needs_model(EstimatorTag t) { return t == EstimatorTag::denoise || t == EstimatorTag::denoise_avg; }

inline std::vector<EstimatorTag> parse_estimator_list(const std::string& csv) {
    std::vector<EstimatorTag> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_estimator_tag(item));
    if (out.empty()) throw config_error("empty estimator list");
    return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class NmseReference { window, full };

struct DatasetSettings {
    int snapshots_per_psnr = 6000;
    std::vector<double> split_ratio{0.6, 0.2, 0.2};
    std::vector<double> psnr_db;  // empty: use psnr_grid_db
};

struct ExperimentConfig {
    GridConfig grid = reference_grid();
    ChannelProfile channel;
    double v_max_kmh = 507.6;
    std::vector<double> psnr_grid_db{0, 5, 10, 15, 20, 25, 30};
    std::vector<double> data_snr_grid_db{0, 5, 10, 15, 20, 25, 30};
    int trials = 500;
    std::vector<EstimatorTag> estimators{EstimatorTag::raw, EstimatorTag::avg, EstimatorTag::threshold,
                                         EstimatorTag::omp};
    std::uint64_t seed = 1;
    double threshold_gamma = 3.0;
    int omp_max_atoms = 5;
    double omp_residual_tol = 0.0;
    std::optional<std::filesystem::path> weights_path;
    EstimatorTag ber_estimator = EstimatorTag::denoise_avg;
    double ber_psnr_db = 25.0;
    NmseReference nmse_reference = NmseReference::window;
    DatasetSettings dataset;
    int workers = 1;

    void validate() const {
        grid.validate();
        if (trials < 1) throw config_error("trials must be at least 1");
        if (channel.num_paths < 1) throw config_error("channel.P must be at least 1");
        if (!(v_max_kmh >= 0.0)) throw config_error("channel.v_max_kmh must be non-negative");
        if (psnr_grid_db.empty()) throw config_error("psnr_grid_db must not be empty");
        if (threshold_gamma < 0.0) throw config_error("threshold_gamma must be non-negative");
        if (omp_max_atoms < 1) throw config_error("omp.max_atoms must be at least 1");
        if (workers < 1) throw config_error("workers must be at least 1");
        if (dataset.snapshots_per_psnr < 1) throw config_error("dataset.snapshots_per_psnr must be at least 1");
        if (dataset.split_ratio.size() != 3) throw config_error("dataset.split_ratio needs three entries");
        double sum = 0.0;
        for (double r : dataset.split_ratio) {
            if (r < 0.0) throw config_error("dataset.split_ratio entries must be non-negative");
            sum += r;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw config_error("dataset.split_ratio must sum to 1");
    }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw config_error(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw config_error(fmt::format("{}: unknown key '{}'", where, key));
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(fmt::format("{}.{}: {}", where, key, e.what()));
    }
}

inline void read_number_list(const json& j, const char* key, std::vector<double>& out, const std::string& where) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw config_error(fmt::format("{}.{} must be an array of numbers", where, key));
    out.clear();
    for (const auto& v : arr) {
        if (!v.is_number()) throw config_error(fmt::format("{}.{} must contain only numbers", where, key));
        out.push_back(v.get<double>());
    }
}

}  // namespace detail

/// Parse and schema-check an experiment configuration.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    using detail::read_opt;
    ExperimentConfig c;
    detail::reject_unknown_keys(j,
                                {"grid", "channel", "psnr_grid_db", "data_snr_grid_db", "trials", "estimators", "seed",
                                 "threshold_gamma", "omp", "denoiser", "ber", "nmse_reference", "dataset", "workers"},
                                "config");
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown_keys(
            g, {"M", "N", "delta_f_hz", "f_c_hz", "M_tau", "N_nu", "N_cp", "F", "delay_back_margin"}, "grid");
        read_opt(g, "M", c.grid.M, "grid");
        read_opt(g, "N", c.grid.N, "grid");
        read_opt(g, "delta_f_hz", c.grid.delta_f, "grid");
        read_opt(g, "f_c_hz", c.grid.f_c, "grid");
        read_opt(g, "M_tau", c.grid.M_tau, "grid");
        read_opt(g, "N_nu", c.grid.N_nu, "grid");
        c.grid.N_cp = c.grid.M_tau;
        read_opt(g, "N_cp", c.grid.N_cp, "grid");
        read_opt(g, "F", c.grid.F, "grid");
        read_opt(g, "delay_back_margin", c.grid.delay_back_margin, "grid");
    }
    if (j.contains("channel")) {
        const auto& ch = j.at("channel");
        detail::reject_unknown_keys(ch, {"P", "gain_profile", "offsets", "v_max_kmh", "decay_db_per_delay_bin"},
                                    "channel");
        read_opt(ch, "P", c.channel.num_paths, "channel");
        std::string profile = "equal";
        read_opt(ch, "gain_profile", profile, "channel");
        if (profile == "equal") {
            c.channel.decay_db_per_delay_bin = 0.0;
        } else if (profile == "exponential") {
            read_opt(ch, "decay_db_per_delay_bin", c.channel.decay_db_per_delay_bin, "channel");
        } else {
            throw config_error("channel.gain_profile must be 'equal' or 'exponential'");
        }
        std::string offsets = to_string(c.channel.offsets);
        read_opt(ch, "offsets", offsets, "channel");
        c.channel.offsets = parse_offset_mode(offsets);
        read_opt(ch, "v_max_kmh", c.v_max_kmh, "channel");
    }
    detail::read_number_list(j, "psnr_grid_db", c.psnr_grid_db, "config");
    detail::read_number_list(j, "data_snr_grid_db", c.data_snr_grid_db, "config");
    read_opt(j, "trials", c.trials, "config");
    if (j.contains("estimators")) {
        const auto& arr = j.at("estimators");
        if (!arr.is_array()) throw config_error("config.estimators must be an array of tags");
        c.estimators.clear();
        for (const auto& t : arr) {
            if (!t.is_string()) throw config_error("config.estimators must contain strings");
            c.estimators.push_back(parse_estimator_tag(t.get<std::string>()));
        }
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
            throw config_error("config.seed must be an integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    read_opt(j, "threshold_gamma", c.threshold_gamma, "config");
    if (j.contains("omp")) {
        const auto& o = j.at("omp");
        detail::reject_unknown_keys(o, {"max_atoms", "residual_tol"}, "omp");
        read_opt(o, "max_atoms", c.omp_max_atoms, "omp");
        read_opt(o, "residual_tol", c.omp_residual_tol, "omp");
    }
    if (j.contains("denoiser")) {
        const auto& d = j.at("denoiser");
        detail::reject_unknown_keys(d, {"weights"}, "denoiser");
        std::string w;
        read_opt(d, "weights", w, "denoiser");
        if (!w.empty()) c.weights_path = w;
    }
    if (j.contains("ber")) {
        const auto& b = j.at("ber");
        detail::reject_unknown_keys(b, {"estimator", "psnr_db"}, "ber");
        std::string tag = to_string(c.ber_estimator);
        read_opt(b, "estimator", tag, "ber");
        c.ber_estimator = parse_estimator_tag(tag);
        read_opt(b, "psnr_db", c.ber_psnr_db, "ber");
    }
    if (j.contains("nmse_reference")) {
        std::string r;
        read_opt(j, "nmse_reference", r, "config");
        if (r == "window")
            c.nmse_reference = NmseReference::window;
        else if (r == "full")
            c.nmse_reference = NmseReference::full;
        else
            throw config_error("config.nmse_reference must be 'window' or 'full'");
    }
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::reject_unknown_keys(d, {"snapshots_per_psnr", "split_ratio", "psnr_db"}, "dataset");
        read_opt(d, "snapshots_per_psnr", c.dataset.snapshots_per_psnr, "dataset");
        detail::read_number_list(d, "split_ratio", c.dataset.split_ratio, "dataset");
        detail::read_number_list(d, "psnr_db", c.dataset.psnr_db, "dataset");
    }
    read_opt(j, "workers", c.workers, "config");
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Physics report
// ---------------------------------------------------------------------------

struct PhysicsReport {
    double T = 0.0;                   // s
    double T_f = 0.0;                 // s
    double delay_resolution = 0.0;    // s
    double doppler_resolution = 0.0;  // Hz
    double v_max = 0.0;               // m/s
    double nu_max = 0.0;              // Hz
    int k_max = 0;
    int window_doppler_half_span = 0;  // N_nu / 2
    bool doppler_fits_window = true;   // k_max <= N_nu/2 - 1
    double coherence_span = 0.0;       // F T_f, s
    double displacement = 0.0;         // m
};

inline PhysicsReport derive_physics(const ExperimentConfig& c) {
    const auto& g = c.grid;
    PhysicsReport r;
    r.T = g.symbol_period();
    r.T_f = g.frame_duration();
    r.delay_resolution = g.delay_resolution();
    r.doppler_resolution = g.doppler_resolution();
    r.v_max = c.v_max_kmh / 3.6;
    r.nu_max = g.f_c * r.v_max / kSpeedOfLight;
    r.k_max = static_cast<int>(std::ceil(r.nu_max / r.doppler_resolution));
    r.window_doppler_half_span = g.N_nu / 2;
    r.doppler_fits_window = r.k_max <= g.N_nu / 2 - 1;
    r.coherence_span = g.F * r.T_f;
    r.displacement = r.v_max * r.coherence_span;
    return r;
}

inline std::string format_physics(const PhysicsReport& r) {
    std::string s;
    s += fmt::format("T_us={:.6f}\n", r.T * 1e6);
    s += fmt::format("T_f_ms={:.6f}\n", r.T_f * 1e3);
    s += fmt::format("delay_resolution_us={:.6f}\n", r.delay_resolution * 1e6);
    s += fmt::format("doppler_resolution_hz={:.6f}\n", r.doppler_resolution);
    s += fmt::format("v_max_mps={:.6f}\n", r.v_max);
    s += fmt::format("nu_max_hz={:.6f}\n", r.nu_max);
    s += fmt::format("k_max={}\n", r.k_max);
    s += fmt::format("window_doppler_half_span={}\n", r.window_doppler_half_span);
    s += fmt::format("doppler_fits_window={}\n", r.doppler_fits_window ? "yes" : "no");
    s += fmt::format("coherence_span_ms={:.6f}\n", r.coherence_span * 1e3);
    s += fmt::format("displacement_m={:.6f}\n", r.displacement);
    return s;
}

// ---------------------------------------------------------------------------
// Parallel trials
// ---------------------------------------------------------------------------

/// Evaluate fn(0..count-1) on `workers` threads; results come back in index order.
template <typename Fn>
auto parallel_trials(int count, int workers, Fn&& fn) -> std::vector<decltype(fn(0))> {
    using R = decltype(fn(0));
    std::vector<std::optional<R>> slots(static_cast<std::size_t>(count));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                slots[static_cast<std::size_t>(i)].emplace(fn(i));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        }
    };
    const int n = std::max(1, std::min(workers, count));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(n));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    std::vector<R> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

/// Everything an estimator may look at besides the snapshots.
struct EstimationContext {
    const GridConfig* grid = nullptr;
    const DenoiserModel* model = nullptr;
    double noise_std = 0.0;  // per-entry std of the pilot-normalised noise
    double threshold_gamma = 3.0;
    int omp_max_atoms = 5;
    double omp_residual_tol = 0.0;
};

inline CMatrix estimate_window(EstimatorTag tag, const SnapshotSet& snaps, const EstimationContext& ctx) {
    const CMatrix& first = snaps.frames.front();
    switch (tag) {
        case EstimatorTag::raw: return first;
        case EstimatorTag::avg: return average_frames(snaps.frames);
        case EstimatorTag::threshold: return threshold_estimate(first, ctx.noise_std, ctx.threshold_gamma).window;
        case EstimatorTag::omp: return omp_estimate(first, ctx.omp_max_atoms, ctx.omp_residual_tol).window;
        case EstimatorTag::denoise:
            if (!ctx.model) throw config_error("estimator 'denoise' needs a weight file");
            return denoise(*ctx.model, first);
        case EstimatorTag::denoise_avg:
            if (!ctx.model) throw config_error("estimator 'denoise-avg' needs a weight file");
            return multi_frame_estimate(*ctx.model, snaps).window;
        case EstimatorTag::perfect: return snaps.clean;
    }
    throw config_error("unhandled estimator");
}

inline std::optional<DenoiserModel> load_model_if_needed(const ExperimentConfig& c,
                                                         const std::vector<EstimatorTag>& tags) {
    if (std::none_of(tags.begin(), tags.end(), needs_model)) return std::nullopt;
    if (!c.weights_path) throw io_error("learned estimator requested but denoiser.weights is not set");
    if (!std::filesystem::exists(*c.weights_path))
        throw io_error("weight file " + c.weights_path->string() + " does not exist");
    return load_model(*c.weights_path);
}

// ---------------------------------------------------------------------------
// Metrics and CSV
// ---------------------------------------------------------------------------

struct MetricRecord {
    std::string estimator_tag;
    double psnr_db = 0.0;
    double data_snr_db = std::numeric_limits<double>::quiet_NaN();
    double nmse = std::numeric_limits<double>::quiet_NaN();
    double ber = std::numeric_limits<double>::quiet_NaN();
    int trials = 0;
};

inline constexpr const char* kCsvHeader = "estimator,psnr_db,data_snr_db,nmse,ber,trials";

inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    return fmt::format("{:.10g}", x);
}

inline std::string to_csv(const std::vector<MetricRecord>& rows) {
    std::string s = kCsvHeader;
    s += '\n';
    for (const auto& r : rows)
        s += fmt::format("{},{},{},{},{},{}\n", r.estimator_tag, format_number(r.psnr_db), format_number(r.data_snr_db),
                         format_number(r.nmse), format_number(r.ber), r.trials);
    return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path.string() + " for writing");
    os << text;
    if (!os) throw io_error("write to " + path.string() + " failed");
}

// Salts separate the stream families of one experiment.
namespace salt {
inline constexpr std::uint64_t channel = 0x4348414eULL;
inline std::uint64_t pilot_noise(double psnr_db) { return 0x504e4f49ULL ^ std::bit_cast<std::uint64_t>(psnr_db); }
inline constexpr std::uint64_t data = 0x44415441ULL;
inline std::uint64_t dataset(double psnr_db) { return 0x44445300ULL ^ (std::bit_cast<std::uint64_t>(psnr_db) << 1); }
}  // namespace salt

inline PathSet trial_channel(const ExperimentConfig& c, int trial) {
    auto rng = child_stream(c.seed, salt::channel, static_cast<std::uint64_t>(trial), StreamRole::channel);
    return sample_paths(c.channel, c.grid, rng);
}

inline double estimate_nmse(const CMatrix& estimate_window, const CMatrix& true_window,
                            const std::optional<CMatrix>& true_full, const GridConfig& g, NmseReference ref) {
    if (ref == NmseReference::window) return nmse(estimate_window, true_window);
    return nmse(embed_window(estimate_window, g), *true_full);
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Mean NMSE per (PSNR, estimator) over `trials` channel realisations.
///
/// Trial t uses the same channel at every PSNR point, and every estimator sees
/// the same snapshots.
inline std::vector<MetricRecord> run_nmse_sweep(const ExperimentConfig& c, const std::vector<EstimatorTag>& tags,
                                                const DenoiserModel* model) {
    c.validate();
    for (auto t : tags) {
        if (t == EstimatorTag::perfect) throw config_error("'perfect' has zero NMSE and is only meaningful for BER");
        if (needs_model(t) && !model) throw config_error("learned estimator requested without a model");
    }
    const auto& g = c.grid;
    const bool need_full = c.nmse_reference == NmseReference::full;
    std::vector<MetricRecord> rows;
    for (double psnr : c.psnr_grid_db) {
        const double noise_var = noise_variance_for_psnr(psnr);
        EstimationContext ctx{&g, model, std::sqrt(noise_var), c.threshold_gamma, c.omp_max_atoms, c.omp_residual_tol};
        auto per_trial = parallel_trials(c.trials, c.workers, [&](int t) {
            const PathSet paths = trial_channel(c, t);
            std::optional<CMatrix> full;
            CMatrix window;
            if (need_full) {
                full = effective_channel_full(paths, g);
                window = crop_window(*full, g);
            } else {
                window = effective_channel_window(paths, g);
            }
            auto rng = child_stream(c.seed, salt::pilot_noise(psnr), static_cast<std::uint64_t>(t), StreamRole::pilot_noise);
            const SnapshotSet snaps = generate_snapshots(window, g.F, psnr, rng);
            std::vector<double> out;
            out.reserve(tags.size());
            for (auto tag : tags)
                out.push_back(estimate_nmse(estimate_window(tag, snaps, ctx), window, full, g, c.nmse_reference));
            return out;
        });
        for (std::size_t e = 0; e < tags.size(); ++e) {
            double sum = 0.0;
            for (const auto& r : per_trial) sum += r[e];
            MetricRecord rec;
            rec.estimator_tag = to_string(tags[e]);
            rec.psnr_db = psnr;
            rec.nmse = sum / c.trials;
            rec.trials = c.trials;
            rows.push_back(rec);
        }
    }
    return rows;
}

/// y = H x for the 2-D circulant generated by an M x N grid, via the 2-D DFT.
inline CVector circulant_apply(const CMatrix& h_eff_full, const CVector& x, const GridConfig& cfg) {
    const CMatrix FM = dft_matrix(cfg.M);
    const CMatrix FN = dft_matrix(cfg.N);
    const double scale = std::sqrt(static_cast<double>(cfg.grid_size()));
    const CMatrix lambda = scale * (FM * h_eff_full * FN);
    const CMatrix X = FM * x.reshaped(cfg.M, cfg.N) * FN;
    const CMatrix Y = FM.adjoint() * lambda.cwiseProduct(X) * FN.adjoint();
    return Y.reshaped();
}

struct BerTrial {
    double nmse = 0.0;
    std::vector<std::size_t> errors;  // per data-SNR point
    std::size_t bits = 0;
};

/// BER versus data SNR with the channel estimated from F pilot snapshots at a
/// fixed PSNR. Per trial: draw a channel, estimate it, send one BPSK frame
/// through the DD model and MMSE-equalise with the estimate. The same bits and
/// noise direction are reused at every SNR point.
inline std::vector<MetricRecord> run_ber_sweep(const ExperimentConfig& c, EstimatorTag tag, double fixed_psnr_db,
                                               const DenoiserModel* model) {
    c.validate();
    if (needs_model(tag) && !model) throw config_error("learned estimator requested without a model");
    if (c.data_snr_grid_db.empty()) throw config_error("data_snr_grid_db must not be empty");
    const auto& g = c.grid;
    const FrameLayout layout = build_layout(g, 1.0);
    const double noise_var = noise_variance_for_psnr(fixed_psnr_db);
    EstimationContext ctx{&g, model, std::sqrt(noise_var), c.threshold_gamma, c.omp_max_atoms, c.omp_residual_tol};
    const std::size_t n_snr = c.data_snr_grid_db.size();

    auto per_trial = parallel_trials(c.trials, c.workers, [&](int t) {
        const auto trial = static_cast<std::uint64_t>(t);
        const PathSet paths = trial_channel(c, t);
        const CMatrix h_full = effective_channel_full(paths, g);
        const CMatrix h_window = crop_window(h_full, g);

        auto pilot_rng = child_stream(c.seed, salt::pilot_noise(fixed_psnr_db), trial, StreamRole::pilot_noise);
        const SnapshotSet snaps = generate_snapshots(h_window, g.F, fixed_psnr_db, pilot_rng);
        const CMatrix est_window = estimate_window(tag, snaps, ctx);
        const CMatrix h_hat_full = tag == EstimatorTag::perfect ? h_full : embed_window(est_window, g);

        auto bit_rng = child_stream(c.seed, salt::data, trial, StreamRole::data_bits);
        std::vector<bool> bits(layout.data_positions.size());
        std::vector<cdouble> symbols(bits.size());
        for (std::size_t i = 0; i < bits.size(); ++i) {
            bits[i] = bit_rng.bit();
            symbols[i] = bpsk_symbol(bits[i]);
        }
        const DDGrid frame = build_frame(layout, symbols);
        const CVector x = frame.data.reshaped();
        const CVector clean = circulant_apply(h_full, x, g);
        auto noise_rng = child_stream(c.seed, salt::data, trial, StreamRole::data_noise);
        const CMatrix unit_noise = complex_gaussian(x.size(), 1, 1.0, noise_rng);

        BerTrial r;
        r.nmse = estimate_nmse(tag == EstimatorTag::perfect ? h_window : est_window, h_window,
                               std::optional<CMatrix>(h_full), g, c.nmse_reference);
        r.bits = bits.size();
        for (double snr : c.data_snr_grid_db) {
            const double sigma_sq = std::pow(10.0, -snr / 10.0);
            const CVector y = clean + std::sqrt(sigma_sq) * unit_noise.col(0);
            const CVector x_hat = mmse_detect_circulant(y, h_hat_full, g, sigma_sq, 1.0);
            const CMatrix x_grid = x_hat.reshaped(g.M, g.N);
            const auto det = demap_bpsk(read_data(layout, x_grid), bits);
            r.errors.push_back(det.bit_errors);
        }
        return r;
    });

    double nmse_sum = 0.0;
    std::vector<std::size_t> errors(n_snr, 0);
    std::size_t bits = 0;
    for (const auto& r : per_trial) {
        nmse_sum += r.nmse;
        bits += r.bits;
        for (std::size_t i = 0; i < n_snr; ++i) errors[i] += r.errors[i];
    }
    std::vector<MetricRecord> rows;
    for (std::size_t i = 0; i < n_snr; ++i) {
        MetricRecord rec;
        rec.estimator_tag = to_string(tag);
        rec.psnr_db = fixed_psnr_db;
        rec.data_snr_db = c.data_snr_grid_db[i];
        rec.nmse = nmse_sum / c.trials;
        rec.ber = bits ? static_cast<double>(errors[i]) / static_cast<double>(bits) : 0.0;
        rec.trials = c.trials;
        rows.push_back(rec);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Dataset export
// ---------------------------------------------------------------------------

/// One record per fresh channel realisation: F noisy windows plus the clean target.
inline DatasetRecord dataset_record(const ExperimentConfig& c, double psnr_db, int index) {
    const auto trial = static_cast<std::uint64_t>(index);
    auto ch_rng = child_stream(c.seed, salt::dataset(psnr_db), trial, StreamRole::channel);
    const PathSet paths = sample_paths(c.channel, c.grid, ch_rng);
    const CMatrix window = effective_channel_window(paths, c.grid);
    auto noise_rng = child_stream(c.seed, salt::dataset(psnr_db), trial, StreamRole::pilot_noise);
    auto snaps = generate_snapshots(window, c.grid.F, psnr_db, noise_rng);
    return {std::move(snaps.frames), window};
}

inline DatasetHeader export_dataset(const ExperimentConfig& c, double psnr_db, const std::filesystem::path& out_path) {
    c.validate();
    DatasetHeader h;
    h.M_tau = static_cast<std::uint32_t>(c.grid.M_tau);
    h.N_nu = static_cast<std::uint32_t>(c.grid.N_nu);
    h.F = static_cast<std::uint32_t>(c.grid.F);
    h.record_count = static_cast<std::uint32_t>(c.dataset.snapshots_per_psnr);
    h.psnr_db = psnr_db;
    DatasetWriter writer(out_path, h);
    // Records are generated in bounded batches so memory stays flat for large exports.
    constexpr int kBatch = 256;
    for (int start = 0; start < c.dataset.snapshots_per_psnr; start += kBatch) {
        const int n = std::min(kBatch, c.dataset.snapshots_per_psnr - start);
        auto batch = parallel_trials(n, c.workers, [&](int i) { return dataset_record(c, psnr_db, start + i); });
        for (const auto& rec : batch) writer.append(rec);
    }
    writer.close();
    return h;
}

inline std::string dataset_file_name(double psnr_db) { return fmt::format("dataset_psnr{}.ddds", format_number(psnr_db)); }

}  // namespace otfsdd
