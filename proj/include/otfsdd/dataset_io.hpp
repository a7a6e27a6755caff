// SPDX-License-Identifier: Apache-2.0
#pragma once

// Training datasets (DDDS) and forward-pass parity vectors (DDPV).
//
// DDDS, 32-byte header:
//   "DDDS" u32 version(=1) u32 M_tau u32 N_nu u32 F u32 record_count f64 psnr_db
// then per record F noisy windows followed by the clean target, each stored as
// two M_tau x N_nu float32 planes (real, then imaginary), rows of the window
// outermost (index u * N_nu + v).
//
// DDPV, 20-byte header:
//   "DDPV" u32 version(=1) u32 M_tau u32 N_nu u32 count
// then per pair the input window and the model output, planes as in DDDS.

#include "otfsdd/binary_io.hpp"
#include "otfsdd/common.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

namespace otfsdd {

inline constexpr std::uint32_t kDatasetFormatVersion = 1;
inline constexpr std::uint32_t kParityFormatVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 32;
inline constexpr std::size_t kParityHeaderBytes = 20;

namespace detail {

inline void write_window(std::ostream& os, const CMatrix& w) {
    std::vector<float> plane(static_cast<std::size_t>(w.size()));
    for (int part = 0; part < 2; ++part) {
        std::size_t i = 0;
        for (Eigen::Index u = 0; u < w.rows(); ++u)
            for (Eigen::Index v = 0; v < w.cols(); ++v, ++i)
                plane[i] = static_cast<float>(part == 0 ? w(u, v).real() : w(u, v).imag());
        bin::write_floats(os, plane);
    }
}

inline CMatrix read_window(std::istream& is, int rows, int cols) {
    std::vector<float> re(static_cast<std::size_t>(rows) * cols);
    std::vector<float> im(re.size());
    bin::read_floats(is, re, "real plane");
    bin::read_floats(is, im, "imaginary plane");
    CMatrix w(rows, cols);
    std::size_t i = 0;
    for (int u = 0; u < rows; ++u)
        for (int v = 0; v < cols; ++v, ++i) {
            if (!std::isfinite(re[i]) || !std::isfinite(im[i])) throw numeric_error("non-finite value in window data");
            w(u, v) = {re[i], im[i]};
        }
    return w;
}

inline std::uint64_t window_bytes(std::uint64_t rows, std::uint64_t cols) { return 2 * rows * cols * sizeof(float); }

}  // namespace detail

struct DatasetRecord {
    std::vector<CMatrix> noisy;  // F windows
    CMatrix clean;
};

struct DatasetHeader {
    std::uint32_t version = kDatasetFormatVersion;
    std::uint32_t M_tau = 0;
    std::uint32_t N_nu = 0;
    std::uint32_t F = 0;
    std::uint32_t record_count = 0;
    double psnr_db = 0.0;

    std::uint64_t file_size() const {
        return kDatasetHeaderBytes + std::uint64_t{record_count} * (F + 1) * detail::window_bytes(M_tau, N_nu);
    }
};

/// Streams records to a DDDS file; the record count in the header is fixed up front.
class DatasetWriter {
public:
    DatasetWriter(const std::filesystem::path& path, const DatasetHeader& header)
        : os_(path, std::ios::binary), header_(header) {
        if (!os_) throw io_error("cannot open " + path.string() + " for writing");
        bin::write_magic(os_, "DDDS");
        bin::write<std::uint32_t>(os_, kDatasetFormatVersion);
        bin::write<std::uint32_t>(os_, header.M_tau);
        bin::write<std::uint32_t>(os_, header.N_nu);
        bin::write<std::uint32_t>(os_, header.F);
        bin::write<std::uint32_t>(os_, header.record_count);
        bin::write<double>(os_, header.psnr_db);
    }

    void append(const DatasetRecord& rec) {
        if (written_ == header_.record_count) throw io_error("dataset: more records than declared in header");
        if (rec.noisy.size() != header_.F) throw config_error("dataset: record has wrong frame count");
        for (const auto& w : rec.noisy) check_shape(w);
        check_shape(rec.clean);
        for (const auto& w : rec.noisy) detail::write_window(os_, w);
        detail::write_window(os_, rec.clean);
        ++written_;
    }

    void close() {
        if (written_ != header_.record_count)
            throw io_error(fmt::format("dataset: wrote {} of {} declared records", written_, header_.record_count));
        os_.close();
        if (!os_) throw io_error("dataset: close failed");
    }

private:
    void check_shape(const CMatrix& w) const {
        if (w.rows() != header_.M_tau || w.cols() != header_.N_nu) throw config_error("dataset: window shape mismatch");
    }

    std::ofstream os_;
    DatasetHeader header_;
    std::uint32_t written_ = 0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<DatasetRecord> records;
};

inline Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open dataset " + path.string());
    Dataset ds;
    if (!bin::magic_equals(bin::read_magic(is), "DDDS")) throw io_error(path.string() + ": not a DDDS file");
    ds.header.version = bin::read<std::uint32_t>(is, "version");
    if (ds.header.version != kDatasetFormatVersion)
        throw io_error(fmt::format("{}: unsupported dataset version {}", path.string(), ds.header.version));
    ds.header.M_tau = bin::read<std::uint32_t>(is, "M_tau");
    ds.header.N_nu = bin::read<std::uint32_t>(is, "N_nu");
    ds.header.F = bin::read<std::uint32_t>(is, "F");
    ds.header.record_count = bin::read<std::uint32_t>(is, "record_count");
    ds.header.psnr_db = bin::read<double>(is, "psnr_db");

    const auto actual = std::filesystem::file_size(path);
    if (actual != ds.header.file_size())
        throw io_error(fmt::format("{}: {} bytes, header implies {}", path.string(), actual, ds.header.file_size()));

    const int rows = static_cast<int>(ds.header.M_tau);
    const int cols = static_cast<int>(ds.header.N_nu);
    ds.records.resize(ds.header.record_count);
    for (auto& rec : ds.records) {
        rec.noisy.reserve(ds.header.F);
        for (std::uint32_t f = 0; f < ds.header.F; ++f) rec.noisy.push_back(detail::read_window(is, rows, cols));
        rec.clean = detail::read_window(is, rows, cols);
    }
    return ds;
}

struct ParityPair {
    CMatrix input;
    CMatrix output;
};

inline void write_parity_file(const std::filesystem::path& path, const std::vector<ParityPair>& pairs) {
    if (pairs.empty()) throw config_error("parity file needs at least one pair");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path.string() + " for writing");
    const auto rows = static_cast<std::uint32_t>(pairs.front().input.rows());
    const auto cols = static_cast<std::uint32_t>(pairs.front().input.cols());
    bin::write_magic(os, "DDPV");
    bin::write<std::uint32_t>(os, kParityFormatVersion);
    bin::write<std::uint32_t>(os, rows);
    bin::write<std::uint32_t>(os, cols);
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(pairs.size()));
    for (const auto& p : pairs) {
        if (p.input.rows() != rows || p.input.cols() != cols || p.output.rows() != rows || p.output.cols() != cols)
            throw config_error("parity pair shape mismatch");
        detail::write_window(os, p.input);
        detail::write_window(os, p.output);
    }
}

inline std::vector<ParityPair> read_parity_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open parity file " + path.string());
    if (!bin::magic_equals(bin::read_magic(is), "DDPV")) throw io_error(path.string() + ": not a DDPV file");
    const auto version = bin::read<std::uint32_t>(is, "version");
    if (version != kParityFormatVersion) throw io_error(fmt::format("unsupported parity version {}", version));
    const auto rows = bin::read<std::uint32_t>(is, "M_tau");
    const auto cols = bin::read<std::uint32_t>(is, "N_nu");
    const auto count = bin::read<std::uint32_t>(is, "count");
    const auto expected = kParityHeaderBytes + std::uint64_t{count} * 2 * detail::window_bytes(rows, cols);
    if (std::filesystem::file_size(path) != expected)
        throw io_error(fmt::format("{}: size does not match {} pairs", path.string(), count));
    std::vector<ParityPair> pairs(count);
    for (auto& p : pairs) {
        p.input = detail::read_window(is, static_cast<int>(rows), static_cast<int>(cols));
        p.output = detail::read_window(is, static_cast<int>(rows), static_cast<int>(cols));
    }
    return pairs;
}

}  // namespace otfsdd
