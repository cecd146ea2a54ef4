#pragma once

#include <optional>

#include "cowpro/config.hpp"
#include "cowpro/encoder.hpp"
#include "cowpro/evaluation.hpp"
#include "cowpro/head.hpp"
#include "cowpro/io.hpp"
#include "cowpro/training.hpp"

// Inference wrapper around a trained checkpoint: replays the training-time
// head settings (with optional ablation overrides), encodes slices with
// frozen weights, and thresholds the upsampled foreground probability.

namespace cowpro {

struct HeadOverrides {
    std::optional<double> top_k_fraction;
    std::optional<int> window;
    std::optional<double> temperature;
};

class CheckpointPredictor {
public:
    CheckpointPredictor(const Checkpoint& ckpt, const HeadOverrides& overrides = {})
        : weights_(weights_from_checkpoint(ckpt)) {
        const TrainConfig config = TrainConfig::from_kv(parse_key_values(ckpt.config_text));
        head_ = config.head;
        if (overrides.top_k_fraction) head_.top_k_fraction = *overrides.top_k_fraction;
        if (overrides.window) head_.window = *overrides.window;
        if (overrides.temperature) head_.temperature = *overrides.temperature;
        head_.validate();
        for (auto& [name, param] : weights_.params) param.set_requires_grad(false);
    }

    const HeadConfig& head() const { return head_; }

    // Binary [H,W] prediction at image resolution. The support features are
    // cached across calls with the same support slice.
    Tensor32 predict(const Tensor32& support_image, const Tensor32& support_mask,
                     const Tensor32& query_image) {
        const int s = query_image.dim(0);
        if (cached_support_ != support_image.node()) {
            support_feat_ = encode(weights_, reshape(support_image, {1, support_image.dim(0),
                                                                     support_image.dim(1)}));
            cached_support_ = support_image.node();
        }
        Tensor32 query_feat = encode(weights_, reshape(query_image, {1, s, query_image.dim(1)}));
        HeadOutput<float> out = head_forward(support_feat_, support_mask, query_feat, head_);
        Tensor32 up = bilinear_resize(reshape(out.fg_prob, {1, out.fg_prob.dim(0), out.fg_prob.dim(1)}),
                                      s, query_image.dim(1));
        std::vector<float> mask(up.data().size());
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = up.data()[i] > 0.5f ? 1.0f : 0.0f;
        return Tensor32::from_data({s, query_image.dim(1)}, std::move(mask));
    }

    SlicePredictor as_slice_predictor() {
        return [this](const Tensor32& si, const Tensor32& sm, const Tensor32& qi) {
            return predict(si, sm, qi);
        };
    }

private:
    EncoderWeights<float> weights_;
    HeadConfig head_;
    const void* cached_support_ = nullptr;
    Tensor32 support_feat_;
};

}  // namespace cowpro
