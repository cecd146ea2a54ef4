#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cowpro/ops.hpp"
#include "cowpro/rng.hpp"
#include "cowpro/tensor.hpp"

// Compact dilated feature extractor: four conv3x3+relu blocks with an
// overall spatial reduction of 8, the stride-1 tail dilated so the receptive
// field keeps growing without further downsampling.

namespace cowpro {

struct EncoderConfig {
    int in_channels = 1;
    int feature_dim = 64;
    std::array<int, 4> block_channels{16, 32, 64, 64};
    std::array<int, 4> dilations{1, 1, 2, 4};
    std::array<int, 4> strides{2, 2, 2, 1};

    void validate() const {
        require(in_channels >= 1, "encoder: in_channels must be >= 1");
        int reduction = 1;
        for (int i = 0; i < 4; ++i) {
            require(block_channels[static_cast<std::size_t>(i)] >= 1, "encoder: block channels must be >= 1");
            require(dilations[static_cast<std::size_t>(i)] >= 1, "encoder: dilations must be >= 1");
            require(strides[static_cast<std::size_t>(i)] >= 1, "encoder: strides must be >= 1");
            reduction *= strides[static_cast<std::size_t>(i)];
        }
        require(reduction == 8, "encoder: strides must multiply to a reduction of 8");
        require(feature_dim == block_channels[3],
                "encoder: feature_dim must equal the last block's channel count");
    }

    std::int64_t param_count() const {
        std::int64_t total = 0;
        int cin = in_channels;
        for (int i = 0; i < 4; ++i) {
            const int cout = block_channels[static_cast<std::size_t>(i)];
            total += static_cast<std::int64_t>(cout) * cin * 9 + cout;
            cin = cout;
        }
        return total;
    }
};

// Ordered name -> tensor map. Order is fixed by construction so the
// optimizer walk and the checkpoint layout are deterministic.
template <typename T>
struct EncoderWeights {
    EncoderConfig config;
    std::vector<std::pair<std::string, Tensor<T>>> params;

    Tensor<T>& find(const std::string& name) {
        for (auto& [n, t] : params)
            if (n == name) return t;
        throw ValidationError("encoder: unknown parameter " + name);
    }
};

// Kaiming-uniform kernels (bound sqrt(6/fan_in)), zero biases. Fully
// determined by the seed via the project Rng; a single stream in parameter
// order keeps the layout reproducible.
template <typename T>
EncoderWeights<T> init_weights(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    EncoderWeights<T> w;
    w.config = config;
    Rng rng(mix64(seed));
    int cin = config.in_channels;
    for (int i = 0; i < 4; ++i) {
        const int cout = config.block_channels[static_cast<std::size_t>(i)];
        const double bound = std::sqrt(6.0 / (static_cast<double>(cin) * 9.0));
        std::vector<T> kdata(static_cast<std::size_t>(cout) * cin * 9);
        for (auto& v : kdata) v = static_cast<T>(rng.uniform(-bound, bound));
        const std::string prefix = "enc.block" + std::to_string(i);
        w.params.emplace_back(prefix + ".weight",
                              Tensor<T>::from_data({cout, cin, 3, 3}, std::move(kdata), true));
        w.params.emplace_back(prefix + ".bias", Tensor<T>::zeros({cout}, true));
        cin = cout;
    }
    return w;
}

template <typename T>
Tensor<T> encode(EncoderWeights<T>& weights, const Tensor<T>& image) {
    const auto& cfg = weights.config;
    require(image.rank() == 3 && image.dim(0) == cfg.in_channels,
            "encode: image must be [" + std::to_string(cfg.in_channels) + ",S,S], got " +
                shape_str(image.shape()));
    require(image.dim(1) % 8 == 0 && image.dim(2) % 8 == 0,
            "encode: spatial extents must be divisible by 8, got " + shape_str(image.shape()));
    Tensor<T> x = image;
    for (int i = 0; i < 4; ++i) {
        const std::string prefix = "enc.block" + std::to_string(i);
        const int dil = cfg.dilations[static_cast<std::size_t>(i)];
        // padding = dilation for a 3x3 kernel keeps extent/stride exact
        x = conv2d(x, weights.find(prefix + ".weight"), cfg.strides[static_cast<std::size_t>(i)],
                   dil, dil);
        x = add_channel_bias(x, weights.find(prefix + ".bias"));
        x = relu(x);
    }
    return x;
}

}  // namespace cowpro
