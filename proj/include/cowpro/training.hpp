#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cowpro/config.hpp"
#include "cowpro/encoder.hpp"
#include "cowpro/head.hpp"
#include "cowpro/io.hpp"
#include "cowpro/superpixel.hpp"
#include "cowpro/transforms.hpp"

// Episodic self-supervised training: superpixel pseudo-mask as the support
// mask, a transformed copy of the slice as the query, cross-entropy on the
// upsampled prediction, and a cyclic-consistency pass that re-segments the
// support with the predicted query mask.

namespace cowpro {

struct Episode {
    Tensor32 support_image;  // [H,W] in [0,1]
    Tensor32 support_mask;   // [H,W] binary
    Tensor32 query_image;
    Tensor32 query_gt;
    std::string slice_id;
    int segment_id = -1;
};

// One eligible training slice plus its persisted superpixel labels.
struct EpisodeSource {
    Tensor32 image;
    const LabelMap* labels = nullptr;
    std::string slice_id;
};

// Samples a pseudo-mask and manufactures the query. Returns nullopt when the
// slice is unusable (no segment large enough) or the warp degenerates the
// ground truth after bounded retries.
std::optional<Episode> build_episode(const Tensor32& slice, const LabelMap& labels,
                                     const TransformRanges& ranges, Rng& rng, int min_fg_pixels,
                                     const std::string& slice_id);

// Cross-entropy against the query ground truth at its own resolution; the
// foreground probability map is bilinearly upsampled first.
template <typename T>
Tensor<T> ssl_loss(const Tensor<T>& fg_prob, const Tensor<T>& query_gt, T weight_bg, T weight_fg) {
    require(query_gt.rank() == 2, "ssl_loss: query_gt must be [H,W]");
    Tensor<T> up = bilinear_resize(reshape(fg_prob, {1, fg_prob.dim(0), fg_prob.dim(1)}),
                                   query_gt.dim(0), query_gt.dim(1));
    Tensor<T> fg = reshape(up, {query_gt.dim(0), query_gt.dim(1)});
    Tensor<T> probs = stack0<T>({sub(Tensor<T>::full(fg.shape(), T(1)), fg), fg});
    return weighted_cross_entropy(probs, query_gt, weight_bg, weight_fg);
}

// Cyclic-consistency loss: the roles swap, the hard predicted query mask
// plays support mask, and prototype extraction uses a fixed threshold
// regardless of the configured mode. Classes are unweighted here.
template <typename T>
Tensor<T> ccr_loss(const Tensor<T>& query_feat, const Tensor<T>& predicted_query_mask,
                   const Tensor<T>& support_feat, const Tensor<T>& support_mask,
                   const HeadConfig& head, double ccr_threshold) {
    HeadConfig cfg = head;
    cfg.threshold.mode = Thresholding::kFixed;
    cfg.threshold.fixed_value = ccr_threshold;
    HeadOutput<T> out = head_forward(query_feat, predicted_query_mask, support_feat, cfg);
    return ssl_loss(out.fg_prob, support_mask, T(1), T(1));
}

// lr(iter) = lr0 * decay^floor(iter/1000)
double lr_schedule(double lr0, double decay, std::int64_t iter);

// w <- w - lr * grad for every parameter, then grads are reset.
void sgd_step(EncoderWeights<float>& weights, double lr);

struct TrainResult {
    std::filesystem::path final_checkpoint;
    std::vector<double> total_losses;  // one per iteration
    int ccr_skipped = 0;
};

Checkpoint make_checkpoint(const EncoderWeights<float>& weights, const TrainConfig& config,
                           std::uint64_t iteration);
EncoderWeights<float> weights_from_checkpoint(const Checkpoint& ckpt);

TrainResult train(const std::vector<EpisodeSource>& data, const TrainConfig& config,
                  const std::filesystem::path& out_dir, const Checkpoint* resume = nullptr);

}  // namespace cowpro
