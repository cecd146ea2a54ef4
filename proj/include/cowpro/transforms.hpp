#pragma once

#include <cstdint>
#include <utility>

#include "cowpro/rng.hpp"
#include "cowpro/tensor.hpp"

// Augmentations that manufacture the query from the support: an affine warp
// about the image center composed with an elastic displacement field, plus a
// gamma intensity curve. Masks are warped with nearest-neighbor sampling and
// stay binary.

namespace cowpro {

struct GeoParams {
    double rotation = 0.0;     // radians
    double translate_x = 0.0;  // fraction of width
    double translate_y = 0.0;  // fraction of height
    double scale_x = 1.0;
    double scale_y = 1.0;
    double shear = 0.0;  // radians
    double elastic_alpha = 0.0;
    double elastic_sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(scale_x > 0.0 && scale_y > 0.0, "geo: scale must be > 0");
        require(elastic_sigma > 0.0, "geo: elastic_sigma must be > 0");
        require(elastic_alpha >= 0.0, "geo: elastic_alpha must be >= 0");
    }
};

struct IntParams {
    double gamma = 1.0;
    std::uint64_t seed = 0;
};

enum class Interp { kBilinear, kNearest };

Tensor32 apply_geo(const Tensor32& image_or_mask, const GeoParams& params, Interp interp);
Tensor32 apply_gamma(const Tensor32& image, const IntParams& params);

// query image = geo(gamma(support)); query ground truth = geo(mask, nearest)
// with the identical GeoParams.
std::pair<Tensor32, Tensor32> make_query(const Tensor32& support_image,
                                         const Tensor32& support_mask, const GeoParams& geo,
                                         const IntParams& intensity);

// Sampling ranges for episodic training. The magnitudes are deliberate
// defaults, tunable through the training config.
struct GeoRanges {
    double rotation_deg = 15.0;
    double translation = 0.05;
    double scale_min = 0.9;
    double scale_max = 1.1;
    double shear_deg = 5.0;
    double elastic_alpha = 15.0;
    double elastic_sigma = 5.0;
};

struct IntRanges {
    double gamma_min = 0.6;
    double gamma_max = 1.67;  // log-uniform
};

GeoParams sample_geo(const GeoRanges& ranges, Rng& rng);
IntParams sample_int(const IntRanges& ranges, Rng& rng);

}  // namespace cowpro
