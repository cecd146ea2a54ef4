#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cowpro/tensor.hpp"

// Felzenszwalb graph-based segmentation over an 8-neighbor grid graph, plus
// pseudo-mask sampling. Label maps are a dense partition: ids 0..n-1 in
// row-major first-occurrence order.

namespace cowpro {

struct FelzParams {
    double scale = 100.0;  // the merge threshold's k
    double sigma = 0.8;
    // <= 0 selects the area-scaled default (400 at 256x256).
    int min_size = 0;

    int resolved_min_size(int h, int w) const;
};

struct LabelMap {
    int h = 0;
    int w = 0;
    int num_segments = 0;
    std::vector<int> labels;

    int segment_size(int id) const;
};

LabelMap felzenszwalb(const Tensor32& image, const FelzParams& params);

// Min-max normalize + Gaussian smooth, exposed so the reference
// implementation in the tests can share the preprocessing while rebuilding
// the graph algorithm independently.
std::vector<float> felz_preprocess(const Tensor32& image, double sigma, int& h, int& w);

// Uniformly sample a segment id and return its binary mask, retrying up to
// num_segments times until the segment has at least min_fg_pixels pixels.
// Returns nullopt when no draw qualifies (the caller skips the slice).
std::optional<Tensor32> sample_pseudo_mask(const LabelMap& labels, std::uint64_t seed,
                                           int min_fg_pixels);

// Area-scaled default for the smallest usable pseudo-mask (100 at 256x256).
int default_min_fg_pixels(int h, int w);

}  // namespace cowpro
