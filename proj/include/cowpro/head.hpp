#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cowpro/ops.hpp"
#include "cowpro/tensor.hpp"

// Correlation-weighted prototype head. From a support feature map and a
// binary support mask it builds foreground/background prototype bags,
// centers them, scores them against every (centered) query pixel, softmaxes
// the scores into per-pixel mixing probabilities, aggregates a dynamic
// per-pixel prototype, and turns the two similarity maps into a foreground
// probability. Everything downstream of the masks is differentiable.

namespace cowpro {

enum class MaskKind { kForeground, kBackground };

enum class Thresholding { kDynamic, kFixed };

struct ThresholdMode {
    Thresholding mode = Thresholding::kDynamic;
    double fixed_value = 0.95;

    void validate() const {
        require(fixed_value > 0.0 && fixed_value <= 1.0,
                "threshold: fixed_value must lie in (0,1]");
    }
};

enum class Similarity { kCosine, kDot };

struct HeadConfig {
    double temperature = 0.05;
    int window = 4;
    ThresholdMode threshold;
    double top_k_fraction = 1.0;
    Similarity similarity = Similarity::kCosine;
    // Scale applied to both similarity maps before the final two-way
    // softmax; raw cosine scores live in [-1,1] and would make it nearly
    // uniform, while a very large scale saturates it so early that the
    // cross-entropy stops reflecting margin growth. The argmax prediction
    // itself is invariant to this value.
    double logit_scale = 8.0;
    // The foreground bag normally carries the mask-weighted global
    // prototype so it can never be empty. Disabling it makes the FG and BG
    // paths fully symmetric (an empty FG bag then becomes an error).
    bool include_global = true;

    void validate() const {
        require(temperature > 0.0, "head: temperature must be > 0");
        require(window >= 1, "head: window must be >= 1");
        require(top_k_fraction > 0.0 && top_k_fraction <= 1.0,
                "head: top_k_fraction must lie in (0,1]");
        require(logit_scale > 0.0, "head: logit_scale must be > 0");
        threshold.validate();
    }
};

template <typename T>
struct PrototypeBag {
    Tensor<T> vectors;  // [D, N_pro]
    MaskKind kind = MaskKind::kForeground;
    bool includes_global = false;

    int count() const { return vectors.dim(1); }
};

template <typename T>
struct ScoreMap {
    Tensor<T> s_fg;  // [H,W]
    Tensor<T> s_bg;  // [H,W]
};

template <typename T>
struct HeadOutput {
    Tensor<T> fg_prob;  // [H,W], foreground channel of the two-way softmax
    ScoreMap<T> scores;
};

namespace headdetail {

template <typename T>
void check_binary(const Tensor<T>& mask, const char* what) {
    for (T v : mask.data())
        require(v == T(0) || v == T(1), std::string(what) + ": mask must be binary");
}

}  // namespace headdetail

// Pooled (soft) and thresholded (binary) downsampled mask, both [H0/window,
// W0/window]. The soft map doubles as the global-prototype weight field.
template <typename T>
struct DownsampledMask {
    Tensor<T> binary;
    Tensor<T> pooled;
};

// Average-pool a binary [H0,W0] mask by `window`, then binarize with a
// strictly-greater comparison against the mode's threshold: fixed value,
// 0.8 * max (dynamic foreground) or mean (dynamic background).
template <typename T>
DownsampledMask<T> downsample_mask_soft(const Tensor<T>& mask, int window,
                                        const ThresholdMode& threshold, MaskKind kind) {
    require(mask.rank() == 2, "downsample_mask: mask must be [H,W]");
    require(window >= 1, "downsample_mask: window must be >= 1");
    require(mask.dim(0) % window == 0 && mask.dim(1) % window == 0,
            "downsample_mask: extents " + shape_str(mask.shape()) +
                " not divisible by window " + std::to_string(window));
    threshold.validate();
    headdetail::check_binary(mask, "downsample_mask");

    Tensor<T> pooled3 = avg_pool2d(reshape(mask, {1, mask.dim(0), mask.dim(1)}), window);
    Tensor<T> pooled = reshape(pooled3, {pooled3.dim(1), pooled3.dim(2)});

    T tau;
    switch (threshold.mode) {
        case Thresholding::kFixed:
            tau = static_cast<T>(threshold.fixed_value);
            break;
        case Thresholding::kDynamic:
        default: {
            if (kind == MaskKind::kForeground) {
                T m = T(0);
                for (T v : pooled.data()) m = std::max(m, v);
                tau = static_cast<T>(0.8) * m;
            } else {
                T s = T(0);
                for (T v : pooled.data()) s += v;
                tau = s / static_cast<T>(pooled.numel());
            }
            break;
        }
    }
    std::vector<T> bin(pooled.data().size());
    for (std::size_t i = 0; i < bin.size(); ++i)
        bin[i] = pooled.data()[i] > tau ? T(1) : T(0);
    return {Tensor<T>::from_data(pooled.shape(), std::move(bin)), pooled};
}

template <typename T>
Tensor<T> downsample_mask(const Tensor<T>& mask, int window, const ThresholdMode& threshold,
                          MaskKind kind) {
    return downsample_mask_soft(mask, window, threshold, kind).binary;
}

// Feature columns at the nonzero cells of the small binary mask, in
// row-major order. For the foreground the global prototype (weighted
// average of the feature map under the soft pooled mask) is appended as the
// last column. A bag that would come out empty signals degenerate support.
template <typename T>
PrototypeBag<T> extract_prototypes(const Tensor<T>& feature, const Tensor<T>& mask_small,
                                   const Tensor<T>& soft_mask, MaskKind kind,
                                   bool include_global = true) {
    require(feature.rank() == 3, "extract_prototypes: feature must be [D,H,W]");
    require(mask_small.rank() == 2 && mask_small.dim(0) == feature.dim(1) &&
                mask_small.dim(1) == feature.dim(2),
            "extract_prototypes: mask " + shape_str(mask_small.shape()) +
                " does not match feature " + shape_str(feature.shape()));
    std::vector<int> indices;
    for (std::int64_t i = 0; i < mask_small.numel(); ++i)
        if (mask_small.data()[static_cast<std::size_t>(i)] != T(0))
            indices.push_back(static_cast<int>(i));

    const bool with_global = kind == MaskKind::kForeground && include_global;
    PrototypeBag<T> bag;
    bag.kind = kind;
    bag.includes_global = with_global;
    if (with_global) {
        Tensor<T> global = reshape(masked_mean(feature, soft_mask), {feature.dim(0), 1});
        bag.vectors = indices.empty() ? global : concat_cols(gather_pixels(feature, indices), global);
    } else {
        if (indices.empty())
            throw DegenerateSupport(kind == MaskKind::kBackground
                                        ? "empty background prototype bag"
                                        : "empty foreground prototype bag");
        bag.vectors = gather_pixels(feature, indices);
    }
    return bag;
}

template <typename T>
PrototypeBag<T> center(const PrototypeBag<T>& bag) {
    PrototypeBag<T> out = bag;
    out.vectors = center_channels(bag.vectors);
    return out;
}

template <typename T>
Tensor<T> correlation(const Tensor<T>& query_feat, const PrototypeBag<T>& bag,
                      Similarity similarity) {
    return bag_correlation(query_feat, bag.vectors, similarity == Similarity::kCosine);
}

// Per-pixel softmax over prototypes with optional top-k restriction; the
// kept count is ceil(top_k_fraction * N_pro).
template <typename T>
Tensor<T> probability_scores(const Tensor<T>& corr, T temperature, double top_k_fraction) {
    require(top_k_fraction > 0.0 && top_k_fraction <= 1.0,
            "probability_scores: top_k_fraction must lie in (0,1]");
    const int n = corr.dim(0);
    const int k = static_cast<int>(std::ceil(top_k_fraction * static_cast<double>(n)));
    if (k >= n) return softmax(corr, 0, temperature);
    return softmax_topk(corr, temperature, k);
}

template <typename T>
Tensor<T> aggregate(const PrototypeBag<T>& bag, const Tensor<T>& probs) {
    return bag_aggregate(bag.vectors, probs);
}

template <typename T>
Tensor<T> score(const Tensor<T>& p_agg, const Tensor<T>& query_feat, Similarity similarity) {
    return pixel_similarity(p_agg, query_feat, similarity == Similarity::kCosine);
}

namespace headdetail {

// Center-of-block subsample that brings a binary mask down to the
// window-aligned grid the head pools from. Integer factors only.
template <typename T>
Tensor<T> subsample_mask(const Tensor<T>& mask, int factor) {
    if (factor == 1) return mask;
    const int h = mask.dim(0) / factor, w = mask.dim(1) / factor;
    std::vector<T> out(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<std::size_t>(y * w + x)] =
                mask.data()[static_cast<std::size_t>((y * factor + factor / 2) * mask.dim(1) +
                                                     (x * factor + factor / 2))];
    return Tensor<T>::from_data({h, w}, std::move(out));
}

template <typename T>
ScoreMap<T> score_pair(const Tensor<T>& support_feat, const Tensor<T>& fg_mask,
                       const Tensor<T>& query_centered, const HeadConfig& config) {
    Tensor<T> bg_mask = sub(Tensor<T>::full(fg_mask.shape(), T(1)), fg_mask);

    ScoreMap<T> scores;
    for (MaskKind kind : {MaskKind::kForeground, MaskKind::kBackground}) {
        const Tensor<T>& mask = kind == MaskKind::kForeground ? fg_mask : bg_mask;
        DownsampledMask<T> down = downsample_mask_soft(mask, config.window, config.threshold, kind);
        PrototypeBag<T> bag =
            extract_prototypes(support_feat, down.binary, down.pooled, kind, config.include_global);
        bag = center(bag);
        Tensor<T> corr = correlation(query_centered, bag, config.similarity);
        Tensor<T> probs =
            probability_scores(corr, static_cast<T>(config.temperature), config.top_k_fraction);
        Tensor<T> agg = aggregate(bag, probs);
        Tensor<T> s = score(agg, query_centered, config.similarity);
        (kind == MaskKind::kForeground ? scores.s_fg : scores.s_bg) = s;
    }
    return scores;
}

}  // namespace headdetail

// Full head pass. The support mask may be given at any integer multiple of
// the window-aligned grid (window * feature extent); it is first brought
// onto that grid by center-of-block subsampling.
template <typename T>
HeadOutput<T> head_forward(const Tensor<T>& support_feat, const Tensor<T>& support_mask,
                           const Tensor<T>& query_feat, const HeadConfig& config) {
    config.validate();
    require(support_feat.rank() == 3 && query_feat.rank() == 3,
            "head_forward: features must be [D,H,W]");
    require(support_feat.shape() == query_feat.shape(),
            "head_forward: support/query feature shapes differ, " +
                shape_str(support_feat.shape()) + " vs " + shape_str(query_feat.shape()));
    require(support_mask.rank() == 2, "head_forward: support mask must be [H0,W0]");
    headdetail::check_binary(support_mask, "head_forward");

    const int grid_h = config.window * support_feat.dim(1);
    const int grid_w = config.window * support_feat.dim(2);
    require(support_mask.dim(0) % grid_h == 0 && support_mask.dim(1) % grid_w == 0 &&
                support_mask.dim(0) / grid_h == support_mask.dim(1) / grid_w,
            "head_forward: mask " + shape_str(support_mask.shape()) +
                " is not an integer multiple of the pooling grid " + std::to_string(grid_h) + "x" +
                std::to_string(grid_w));
    Tensor<T> aligned = headdetail::subsample_mask(support_mask, support_mask.dim(0) / grid_h);

    Tensor<T> query_centered = center_channels(query_feat);
    ScoreMap<T> scores = headdetail::score_pair(support_feat, aligned, query_centered, config);

    const T alpha = static_cast<T>(config.logit_scale);
    Tensor<T> logits = stack0<T>({scale(scores.s_bg, alpha), scale(scores.s_fg, alpha)});
    Tensor<T> two_way = softmax(logits, 0, T(1));
    HeadOutput<T> out;
    out.fg_prob = index_axis0(two_way, 1);
    out.scores = scores;
    return out;
}

}  // namespace cowpro
