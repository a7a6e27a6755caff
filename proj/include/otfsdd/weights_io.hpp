// SPDX-License-Identifier: Apache-2.0
#pragma once

// DDNW weight files.
//
//   "DDNW"  u32 version (=1)  u32 layer_count
//   per layer:
//     u8  kind (0 conv1x1, 1 conv3x3, 2 layernorm, 3 projection)
//     u32 rank, u32 dims[rank]
//     f32 weights[prod(dims)]          (rank 0 means no tensor)
//     u32 bias_len, f32 bias[bias_len]
//     layernorm only: u32 len, f32 scale[len], u32 len, f32 shift[len]
//
// All integers and floats little-endian.

#include "otfsdd/binary_io.hpp"
#include "otfsdd/denoiser.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace otfsdd {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

namespace detail {

inline constexpr std::uint32_t kMaxRank = 8;
inline constexpr std::uint64_t kMaxTensor = 1ull << 26;

inline void write_vector(std::ostream& os, const std::vector<float>& v) {
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(v.size()));
    bin::write_floats(os, v);
}

inline std::vector<float> read_vector(std::istream& is, const char* what) {
    const auto n = bin::read<std::uint32_t>(is, what);
    if (n > kMaxTensor) throw ModelError(ModelFault::shape_mismatch, fmt::format("{} length {} is implausible", what, n));
    std::vector<float> v(n);
    bin::read_floats(is, v, what);
    return v;
}

}  // namespace detail

inline void write_model(std::ostream& os, const DenoiserModel& model) {
    bin::write_magic(os, "DDNW");
    bin::write<std::uint32_t>(os, kWeightFormatVersion);
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) {
        bin::write<std::uint8_t>(os, static_cast<std::uint8_t>(l.kind));
        bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(l.dims.size()));
        for (auto d : l.dims) bin::write<std::uint32_t>(os, d);
        bin::write_floats(os, l.weights);
        detail::write_vector(os, l.bias);
        if (l.kind == LayerKind::layernorm) {
            detail::write_vector(os, l.ln_scale);
            detail::write_vector(os, l.ln_shift);
        }
    }
}

/// Parse and validate a model. Each failure mode raises ModelError with its own fault.
inline DenoiserModel read_model(std::istream& is) {
    try {
        if (!bin::magic_equals(bin::read_magic(is), "DDNW"))
            throw ModelError(ModelFault::bad_magic, "not a DDNW weight file");
        const auto version = bin::read<std::uint32_t>(is, "version");
        if (version != kWeightFormatVersion)
            throw ModelError(ModelFault::version_mismatch,
                             fmt::format("file version {}, reader supports {}", version, kWeightFormatVersion));
        const auto count = bin::read<std::uint32_t>(is, "layer count");
        if (count > 4096) throw ModelError(ModelFault::shape_mismatch, fmt::format("layer count {} is implausible", count));

        DenoiserModel model;
        model.layers.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            Layer l;
            const auto code = bin::read<std::uint8_t>(is, "layer kind");
            if (code > static_cast<std::uint8_t>(LayerKind::projection))
                throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: unknown kind code {}", i, code));
            l.kind = static_cast<LayerKind>(code);
            const auto rank = bin::read<std::uint32_t>(is, "rank");
            if (rank > detail::kMaxRank)
                throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: rank {} is implausible", i, rank));
            std::uint64_t elements = rank == 0 ? 0 : 1;
            for (std::uint32_t r = 0; r < rank; ++r) {
                l.dims.push_back(bin::read<std::uint32_t>(is, "dims"));
                elements *= l.dims.back();
                if (elements > detail::kMaxTensor)
                    throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: tensor too large", i));
            }
            l.weights.resize(elements);
            bin::read_floats(is, l.weights, "weights");
            l.bias = detail::read_vector(is, "bias");
            if (l.kind == LayerKind::layernorm) {
                l.ln_scale = detail::read_vector(is, "layernorm scale");
                l.ln_shift = detail::read_vector(is, "layernorm shift");
            }
            model.layers.push_back(std::move(l));
        }
        if (is.peek() != std::char_traits<char>::eof())
            throw ModelError(ModelFault::shape_mismatch, "trailing bytes after last layer");
        validate(model);
        return model;
    } catch (const bin::TruncatedInput& e) {
        throw ModelError(ModelFault::truncated, e.what());
    }
}

inline void save_model(const std::filesystem::path& path, const DenoiserModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open " + path.string() + " for writing");
    write_model(os, model);
}

inline DenoiserModel load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open weight file " + path.string());
    return read_model(is);
}

inline std::string serialize_model(const DenoiserModel& model) {
    std::ostringstream os(std::ios::binary);
    write_model(os, model);
    return std::move(os).str();
}

}  // namespace otfsdd
