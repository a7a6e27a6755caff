// SPDX-License-Identifier: Apache-2.0
//
// otfsdd: command-line driver for the delay-Doppler channel-estimation toolkit.
//
//   otfsdd physics      --config cfg.json [--out dir]
//   otfsdd make-dataset --config cfg.json --out dir [--psnr dB ...]
//   otfsdd nmse-sweep   --config cfg.json --out dir [--estimators raw,avg,...] [--trials n]
//   otfsdd ber-sweep    --config cfg.json --out dir [--estimator tag] [--psnr dB] [--trials n]
//   otfsdd infer        --model w.ddnw (--parity p.ddpv | --dataset d.ddds) [--out dir]
//   otfsdd selftest
//
// Exit codes: 0 success, 1 usage, 2 config, 3 I/O, 4 numeric failure.

#include "otfsdd/otfsdd.hpp"
#include "otfsdd/selftest.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace otfsdd;

namespace {

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> trials;
};

ExperimentConfig load_with_overrides(const CommonOptions& o) {
    ExperimentConfig c = load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.workers) c.workers = *o.workers;
    if (o.trials) c.trials = *o.trials;
    c.validate();
    return c;
}

fs::path prepare_out_dir(const std::string& out) {
    if (out.empty()) throw Error(ErrorKind::usage, "--out is required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw io_error("cannot create output directory " + out + ": " + ec.message());
    return fs::path(out);
}

int cmd_physics(const CommonOptions& o) {
    const auto c = load_with_overrides(o);
    const auto text = format_physics(derive_physics(c));
    std::cout << text;
    if (!o.out.empty()) write_text(prepare_out_dir(o.out) / "physics.txt", text);
    return 0;
}

int cmd_make_dataset(const CommonOptions& o, const std::vector<double>& psnr_override) {
    const auto c = load_with_overrides(o);
    const auto dir = prepare_out_dir(o.out);
    std::vector<double> grid = psnr_override;
    if (grid.empty()) grid = c.dataset.psnr_db.empty() ? c.psnr_grid_db : c.dataset.psnr_db;
    for (double psnr : grid) {
        const auto path = dir / dataset_file_name(psnr);
        const auto h = export_dataset(c, psnr, path);
        std::cout << fmt::format("{}: {} records, {} bytes\n", path.string(), h.record_count, h.file_size());
    }
    return 0;
}

int cmd_nmse_sweep(const CommonOptions& o, const std::string& estimators) {
    auto c = load_with_overrides(o);
    if (!estimators.empty()) c.estimators = parse_estimator_list(estimators);
    const auto dir = prepare_out_dir(o.out);
    const auto model = load_model_if_needed(c, c.estimators);
    const auto rows = run_nmse_sweep(c, c.estimators, model ? &*model : nullptr);
    const auto csv = to_csv(rows);
    write_text(dir / "nmse.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_ber_sweep(const CommonOptions& o, const std::string& estimator, std::optional<double> psnr) {
    auto c = load_with_overrides(o);
    if (!estimator.empty()) c.ber_estimator = parse_estimator_tag(estimator);
    const auto dir = prepare_out_dir(o.out);
    const auto model = load_model_if_needed(c, {c.ber_estimator});
    const auto rows = run_ber_sweep(c, c.ber_estimator, psnr.value_or(c.ber_psnr_db), model ? &*model : nullptr);
    const auto csv = to_csv(rows);
    write_text(dir / fmt::format("ber_{}.csv", to_string(c.ber_estimator)), csv);
    std::cout << csv;
    return 0;
}

struct InferOptions {
    std::string model;
    std::string parity;
    std::string dataset;
    std::string emit_parity;
    int count = 16;
    double tolerance = 1e-5;
    std::string out;
    std::uint64_t seed = 1;
};

int cmd_infer(const InferOptions& o) {
    const DenoiserModel model = load_model(o.model);
    int status = 0;
    if (!o.parity.empty()) {
        const auto pairs = read_parity_file(o.parity);
        double worst = 0.0;
        for (const auto& p : pairs) {
            const CMatrix got = denoise(model, p.input);
            // per stored float, i.e. real and imaginary planes separately
            worst = std::max(worst, (got.real() - p.output.real()).cwiseAbs().maxCoeff());
            worst = std::max(worst, (got.imag() - p.output.imag()).cwiseAbs().maxCoeff());
        }
        const bool ok = worst <= o.tolerance;
        std::cout << fmt::format("parity: {} vectors, max-abs error {:.3e} (tolerance {:.1e}) {}\n", pairs.size(),
                                 worst, o.tolerance, ok ? "PASS" : "FAIL");
        if (!ok) status = static_cast<int>(ErrorKind::numeric);
    }
    if (!o.dataset.empty()) {
        const Dataset ds = read_dataset(o.dataset);
        const std::vector<EstimatorTag> tags{EstimatorTag::raw, EstimatorTag::avg, EstimatorTag::denoise,
                                             EstimatorTag::denoise_avg};
        std::vector<double> sums(tags.size(), 0.0);
        for (const auto& rec : ds.records) {
            SnapshotSet snaps;
            snaps.frames = rec.noisy;
            snaps.clean = rec.clean;
            EstimationContext ctx;
            ctx.model = &model;
            for (std::size_t e = 0; e < tags.size(); ++e) sums[e] += nmse(estimate_window(tags[e], snaps, ctx), rec.clean);
        }
        std::vector<MetricRecord> rows;
        for (std::size_t e = 0; e < tags.size(); ++e) {
            MetricRecord r;
            r.estimator_tag = to_string(tags[e]);
            r.psnr_db = ds.header.psnr_db;
            r.nmse = ds.records.empty() ? 0.0 : sums[e] / static_cast<double>(ds.records.size());
            r.trials = static_cast<int>(ds.records.size());
            rows.push_back(r);
        }
        const auto csv = to_csv(rows);
        if (!o.out.empty()) write_text(prepare_out_dir(o.out) / "infer.csv", csv);
        std::cout << csv;
    }
    if (!o.emit_parity.empty()) {
        if (o.count < 1) throw Error(ErrorKind::usage, "--count must be at least 1");
        // Window shape is not stored in the weights; use the reference 8 x 8.
        const GridConfig g = reference_grid();
        std::vector<ParityPair> pairs;
        for (int i = 0; i < o.count; ++i) {
            auto rng = child_stream(o.seed, static_cast<std::uint64_t>(i), StreamRole::parity);
            ParityPair p;
            p.input = complex_gaussian(g.M_tau, g.N_nu, 1.0, rng).cast<std::complex<float>>().cast<cdouble>();
            p.output = denoise(model, p.input);
            pairs.push_back(std::move(p));
        }
        write_parity_file(o.emit_parity, pairs);
        std::cout << fmt::format("wrote {} parity vectors to {}\n", pairs.size(), o.emit_parity);
    }
    if (o.parity.empty() && o.dataset.empty() && o.emit_parity.empty())
        throw Error(ErrorKind::usage, "infer needs --parity, --dataset or --emit-parity");
    return status;
}

int cmd_selftest() {
    const auto results = run_selftest();
    bool all = true;
    for (const auto& r : results) {
        std::cout << fmt::format("[{}] {}: {}\n", r.passed ? "PASS" : "FAIL", r.name, r.detail);
        all = all && r.passed;
    }
    return all ? 0 : static_cast<int>(ErrorKind::numeric);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay-Doppler OTFS channel estimation toolkit"};
    app.require_subcommand(1);

    CommonOptions common;
    auto add_common = [&common](CLI::App* sub, bool out_required) {
        sub->add_option("--config", common.config, "Experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        auto* out = sub->add_option("--out", common.out, "Output directory");
        if (out_required) out->required();
        sub->add_option("--seed", common.seed, "Override the configured master seed");
        sub->add_option("--workers", common.workers, "Worker threads (results do not depend on this)");
    };

    auto* physics = app.add_subcommand("physics", "Print derived timing and mobility quantities");
    add_common(physics, false);

    std::vector<double> dataset_psnr;
    auto* make_dataset = app.add_subcommand("make-dataset", "Export DDDS training datasets, one per PSNR");
    add_common(make_dataset, true);
    make_dataset->add_option("--psnr", dataset_psnr, "PSNR points in dB (default: the configured grid)");

    std::string estimators;
    auto* nmse_sweep = app.add_subcommand("nmse-sweep", "Mean NMSE per PSNR and estimator");
    add_common(nmse_sweep, true);
    nmse_sweep->add_option("--estimators", estimators, "Comma-separated estimator tags");
    nmse_sweep->add_option("--trials", common.trials, "Override the configured trial count");

    std::string ber_estimator;
    std::optional<double> ber_psnr;
    auto* ber_sweep = app.add_subcommand("ber-sweep", "BER versus data SNR at a fixed pilot SNR");
    add_common(ber_sweep, true);
    ber_sweep->add_option("--estimator", ber_estimator, "Estimator tag (perfect for known CSI)");
    ber_sweep->add_option("--psnr", ber_psnr, "Pilot SNR in dB (default: config ber.psnr_db)");
    ber_sweep->add_option("--trials", common.trials, "Override the configured trial count");

    InferOptions infer_opts;
    auto* infer = app.add_subcommand("infer", "Run the denoiser on parity vectors or a dataset");
    infer->add_option("--model", infer_opts.model, "DDNW weight file")->required()->check(CLI::ExistingFile);
    infer->add_option("--parity", infer_opts.parity, "DDPV file to verify against")->check(CLI::ExistingFile);
    infer->add_option("--dataset", infer_opts.dataset, "DDDS file to evaluate")->check(CLI::ExistingFile);
    infer->add_option("--emit-parity", infer_opts.emit_parity, "Write DDPV vectors from this forward pass");
    infer->add_option("--count", infer_opts.count, "Vectors to emit with --emit-parity");
    infer->add_option("--tolerance", infer_opts.tolerance, "Max-abs parity tolerance");
    infer->add_option("--seed", infer_opts.seed, "Seed for --emit-parity inputs");
    infer->add_option("--out", infer_opts.out, "Output directory for infer.csv");

    auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ErrorKind::usage);
    }

    try {
        if (physics->parsed()) return cmd_physics(common);
        if (make_dataset->parsed()) return cmd_make_dataset(common, dataset_psnr);
        if (nmse_sweep->parsed()) return cmd_nmse_sweep(common, estimators);
        if (ber_sweep->parsed()) return cmd_ber_sweep(common, ber_estimator, ber_psnr);
        if (infer->parsed()) return cmd_infer(infer_opts);
        if (selftest->parsed()) return cmd_selftest();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::numeric);
    }
    return static_cast<int>(ErrorKind::usage);
}
