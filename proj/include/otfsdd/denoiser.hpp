// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gated residual denoiser (activation-free, NAFNet-style) for M_tau x N_nu windows.
//
// Topology, as an ordered layer list:
//   stem      conv1x1 2 -> W
//   block x B A:  conv1x1 W -> W                       (projection skip)
//             U:  conv1x1 W -> W, conv3x3 W -> W, layernorm
//             V:  conv1x1 W -> W, conv3x3 W -> W, layernorm
//             out = A(X) + U(X) * V(X)
//   tail      conv3x3 W -> W, projection (1x1) W -> 2
//
// 3x3 convolutions use stride 1 and zero padding 1. There are no pointwise
// nonlinearities; the gate product is the only nonlinear operation.

#include "otfsdd/common.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace otfsdd {

enum class LayerKind : std::uint8_t {
    conv1x1 = 0,
    conv3x3 = 1,
    layernorm = 2,
    projection = 3,
};

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv1x1: return "conv1x1";
        case LayerKind::conv3x3: return "conv3x3";
        case LayerKind::layernorm: return "layernorm";
        case LayerKind::projection: return "projection";
    }
    return "?";
}

inline constexpr int kernel_size(LayerKind k) { return k == LayerKind::conv3x3 ? 3 : 1; }

/// One layer. Convolution weights are [out][in][kh][kw] row-major; layer norm
/// carries only per-channel scale and shift.
struct Layer {
    LayerKind kind = LayerKind::conv1x1;
    std::vector<std::uint32_t> dims;
    std::vector<float> weights;
    std::vector<float> bias;
    std::vector<float> ln_scale;
    std::vector<float> ln_shift;

    bool is_conv() const { return kind != LayerKind::layernorm; }
    int in_channels() const { return is_conv() ? static_cast<int>(dims.at(1)) : static_cast<int>(ln_scale.size()); }
    int out_channels() const { return is_conv() ? static_cast<int>(dims.at(0)) : static_cast<int>(ln_scale.size()); }
    std::size_t parameter_count() const {
        return weights.size() + bias.size() + ln_scale.size() + ln_shift.size();
    }
};

inline constexpr float kLayerNormEpsilon = 1e-6f;
inline constexpr int kLayersPerBlock = 7;
inline constexpr int kStemLayers = 1;
inline constexpr int kTailLayers = 2;

struct DenoiserModel {
    std::vector<Layer> layers;

    int blocks() const { return (static_cast<int>(layers.size()) - kStemLayers - kTailLayers) / kLayersPerBlock; }
    int width() const { return layers.empty() ? 0 : layers.front().out_channels(); }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.parameter_count();
        return n;
    }
};

/// (21B + 9) W^2 + (9B + 6) W + 2; 93 W^2 + 42 W + 2 at B = 4.
inline constexpr long long reference_parameter_count(long long width, long long blocks) {
    return (21 * blocks + 9) * width * width + (9 * blocks + 6) * width + 2;
}

inline constexpr int reference_layer_count(int blocks) { return kStemLayers + kLayersPerBlock * blocks + kTailLayers; }

enum class ModelFault { bad_magic, version_mismatch, truncated, shape_mismatch, non_finite };

inline const char* to_string(ModelFault f) {
    switch (f) {
        case ModelFault::bad_magic: return "bad magic";
        case ModelFault::version_mismatch: return "version mismatch";
        case ModelFault::truncated: return "truncated file";
        case ModelFault::shape_mismatch: return "shape mismatch";
        case ModelFault::non_finite: return "non-finite weight";
    }
    return "?";
}

class ModelError : public Error {
public:
    ModelError(ModelFault fault, const std::string& what)
        : Error(fault == ModelFault::non_finite ? ErrorKind::numeric : ErrorKind::io,
                std::string(to_string(fault)) + ": " + what),
          fault_(fault) {}
    ModelFault fault() const noexcept { return fault_; }

private:
    ModelFault fault_;
};

inline Layer make_conv(LayerKind kind, int in_ch, int out_ch) {
    const int k = kernel_size(kind);
    Layer l;
    l.kind = kind;
    l.dims = {static_cast<std::uint32_t>(out_ch), static_cast<std::uint32_t>(in_ch), static_cast<std::uint32_t>(k),
              static_cast<std::uint32_t>(k)};
    l.weights.assign(static_cast<std::size_t>(out_ch) * in_ch * k * k, 0.0f);
    l.bias.assign(static_cast<std::size_t>(out_ch), 0.0f);
    return l;
}

inline Layer make_layernorm(int channels) {
    Layer l;
    l.kind = LayerKind::layernorm;
    l.ln_scale.assign(static_cast<std::size_t>(channels), 1.0f);
    l.ln_shift.assign(static_cast<std::size_t>(channels), 0.0f);
    return l;
}

/// Reference topology with zero convolution weights and unit layer-norm scales.
inline DenoiserModel make_reference_model(int width, int blocks) {
    if (width < 1 || blocks < 0) throw config_error("denoiser needs width >= 1 and blocks >= 0");
    DenoiserModel m;
    m.layers.push_back(make_conv(LayerKind::conv1x1, 2, width));
    for (int b = 0; b < blocks; ++b) {
        m.layers.push_back(make_conv(LayerKind::conv1x1, width, width));
        for (int branch = 0; branch < 2; ++branch) {
            m.layers.push_back(make_conv(LayerKind::conv1x1, width, width));
            m.layers.push_back(make_conv(LayerKind::conv3x3, width, width));
            m.layers.push_back(make_layernorm(width));
        }
    }
    m.layers.push_back(make_conv(LayerKind::conv3x3, width, width));
    m.layers.push_back(make_conv(LayerKind::projection, width, 2));
    return m;
}

namespace detail {

inline LayerKind expected_kind(std::size_t index, std::size_t count) {
    if (index == 0) return LayerKind::conv1x1;
    if (index == count - 2) return LayerKind::conv3x3;
    if (index == count - 1) return LayerKind::projection;
    switch ((index - 1) % kLayersPerBlock) {
        case 0: case 1: case 4: return LayerKind::conv1x1;
        case 2: case 5: return LayerKind::conv3x3;
        default: return LayerKind::layernorm;
    }
}

}  // namespace detail

/// Layer-kind sequence, shape chain and finiteness check. Throws ModelError.
inline void validate(const DenoiserModel& m) {
    const std::size_t n = m.layers.size();
    if (n < static_cast<std::size_t>(kStemLayers + kTailLayers) || (n - kStemLayers - kTailLayers) % kLayersPerBlock != 0)
        throw ModelError(ModelFault::shape_mismatch, fmt::format("{} layers does not match 3 + 7B", n));

    const Layer& stem = m.layers.front();
    if (stem.kind == LayerKind::layernorm || stem.dims.size() != 4 || stem.dims[0] < 1)
        throw ModelError(ModelFault::shape_mismatch, "stem has no output channels");
    const int width = static_cast<int>(stem.dims[0]);

    for (std::size_t i = 0; i < n; ++i) {
        const Layer& l = m.layers[i];
        const LayerKind want = detail::expected_kind(i, n);
        if (l.kind != want)
            throw ModelError(ModelFault::shape_mismatch,
                             fmt::format("layer {} is {}, expected {}", i, to_string(l.kind), to_string(want)));
        if (l.kind == LayerKind::layernorm) {
            if (!l.dims.empty() || !l.weights.empty() || !l.bias.empty())
                throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: layernorm carries a tensor", i));
            if (l.ln_scale.size() != static_cast<std::size_t>(width) || l.ln_shift.size() != l.ln_scale.size())
                throw ModelError(ModelFault::shape_mismatch,
                                 fmt::format("layer {}: layernorm has {} channels, expected {}", i, l.ln_scale.size(), width));
        } else {
            const int k = kernel_size(l.kind);
            const int in_want = i == 0 ? 2 : width;
            const int out_want = i == n - 1 ? 2 : width;
            if (l.dims.size() != 4 || static_cast<int>(l.dims[0]) != out_want || static_cast<int>(l.dims[1]) != in_want ||
                static_cast<int>(l.dims[2]) != k || static_cast<int>(l.dims[3]) != k)
                throw ModelError(ModelFault::shape_mismatch,
                                 fmt::format("layer {} ({}): expected dims [{}][{}][{}][{}]", i, to_string(l.kind),
                                             out_want, in_want, k, k));
            if (l.weights.size() != static_cast<std::size_t>(out_want) * in_want * k * k)
                throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: weight count mismatch", i));
            if (l.bias.size() != static_cast<std::size_t>(out_want))
                throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: bias length mismatch", i));
            if (!l.ln_scale.empty() || !l.ln_shift.empty())
                throw ModelError(ModelFault::shape_mismatch, fmt::format("layer {}: convolution carries norm vectors", i));
        }
        auto finite = [](const std::vector<float>& v) {
            for (float x : v)
                if (!std::isfinite(x)) return false;
            return true;
        };
        if (!finite(l.weights) || !finite(l.bias) || !finite(l.ln_scale) || !finite(l.ln_shift))
            throw ModelError(ModelFault::non_finite, fmt::format("layer {}", i));
    }
}

/// Channel-major float feature map [C][rows][cols].
struct FeatureMap {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    FeatureMap() = default;
    FeatureMap(int c, int r, int w) : channels(c), rows(r), cols(w), data(static_cast<std::size_t>(c) * r * w, 0.0f) {}

    float& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * rows + y) * cols + x]; }
    float at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * rows + y) * cols + x]; }
};

inline FeatureMap to_feature_map(const CMatrix& z) {
    FeatureMap f(2, static_cast<int>(z.rows()), static_cast<int>(z.cols()));
    for (int y = 0; y < f.rows; ++y)
        for (int x = 0; x < f.cols; ++x) {
            f.at(0, y, x) = static_cast<float>(z(y, x).real());
            f.at(1, y, x) = static_cast<float>(z(y, x).imag());
        }
    return f;
}

inline CMatrix to_complex_window(const FeatureMap& f) {
    CMatrix z(f.rows, f.cols);
    for (int y = 0; y < f.rows; ++y)
        for (int x = 0; x < f.cols; ++x) z(y, x) = {f.at(0, y, x), f.at(1, y, x)};
    return z;
}

inline FeatureMap conv2d(const Layer& layer, const FeatureMap& in) {
    const int out_ch = layer.out_channels();
    const int in_ch = layer.in_channels();
    const int k = kernel_size(layer.kind);
    const int pad = k / 2;
    FeatureMap out(out_ch, in.rows, in.cols);
    for (int o = 0; o < out_ch; ++o) {
        for (int y = 0; y < in.rows; ++y)
            for (int x = 0; x < in.cols; ++x) out.at(o, y, x) = layer.bias[o];
        for (int i = 0; i < in_ch; ++i)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const float w = layer.weights[((static_cast<std::size_t>(o) * in_ch + i) * k + ky) * k + kx];
                    if (w == 0.0f) continue;
                    for (int y = 0; y < in.rows; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= in.rows) continue;
                        for (int x = 0; x < in.cols; ++x) {
                            const int sx = x + kx - pad;
                            if (sx < 0 || sx >= in.cols) continue;
                            out.at(o, y, x) += w * in.at(i, sy, sx);
                        }
                    }
                }
    }
    return out;
}

/// Per-position normalisation across channels, then per-channel affine.
inline FeatureMap layer_norm(const Layer& layer, const FeatureMap& in) {
    FeatureMap out(in.channels, in.rows, in.cols);
    const float inv_c = 1.0f / static_cast<float>(in.channels);
    for (int y = 0; y < in.rows; ++y)
        for (int x = 0; x < in.cols; ++x) {
            float mean = 0.0f;
            for (int c = 0; c < in.channels; ++c) mean += in.at(c, y, x);
            mean *= inv_c;
            float var = 0.0f;
            for (int c = 0; c < in.channels; ++c) {
                const float d = in.at(c, y, x) - mean;
                var += d * d;
            }
            var *= inv_c;
            const float inv_std = 1.0f / std::sqrt(var + kLayerNormEpsilon);
            for (int c = 0; c < in.channels; ++c)
                out.at(c, y, x) = (in.at(c, y, x) - mean) * inv_std * layer.ln_scale[c] + layer.ln_shift[c];
        }
    return out;
}

/// Forward pass on a complex window; float32 arithmetic throughout.
inline CMatrix denoise(const DenoiserModel& model, const CMatrix& z) {
    if (z.rows() < 1 || z.cols() < 1) throw config_error("denoise: empty window");
    if (model.layers.size() < static_cast<std::size_t>(kStemLayers + kTailLayers))
        throw config_error("denoise: model has no layers");
    const auto& L = model.layers;
    FeatureMap x = conv2d(L[0], to_feature_map(z));
    std::size_t i = kStemLayers;
    for (int b = 0; b < model.blocks(); ++b, i += kLayersPerBlock) {
        const FeatureMap skip = conv2d(L[i], x);
        const FeatureMap u = layer_norm(L[i + 3], conv2d(L[i + 2], conv2d(L[i + 1], x)));
        const FeatureMap v = layer_norm(L[i + 6], conv2d(L[i + 5], conv2d(L[i + 4], x)));
        FeatureMap next = skip;
        for (std::size_t e = 0; e < next.data.size(); ++e) next.data[e] += u.data[e] * v.data[e];
        x = std::move(next);
    }
    x = conv2d(L[i], x);
    x = conv2d(L[i + 1], x);
    return to_complex_window(x);
}

}  // namespace otfsdd
