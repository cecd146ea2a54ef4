#include "cowpro/transforms.hpp"

#include <cmath>
#include <vector>

namespace cowpro {

namespace {

struct Mat2 {
    double a, b, c, d;  // row-major [[a,b],[c,d]]

    Mat2 inverse() const {
        const double det = a * d - b * c;
        require(std::abs(det) > 1e-12, "geo: singular affine matrix");
        const double inv = 1.0 / det;
        return {d * inv, -b * inv, -c * inv, a * inv};
    }
};

Mat2 affine_matrix(const GeoParams& p) {
    const double cs = std::cos(p.rotation), sn = std::sin(p.rotation);
    const double sh = std::tan(p.shear);
    // R * Shear * Scale
    const double m00 = cs, m01 = cs * sh - sn;
    const double m10 = sn, m11 = sn * sh + cs;
    return {m00 * p.scale_x, m01 * p.scale_y, m10 * p.scale_x, m11 * p.scale_y};
}

std::vector<float> gaussian_kernel1d(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = static_cast<float>(v);
        sum += v;
    }
    for (auto& v : k) v = static_cast<float>(v / sum);
    return k;
}

void smooth_separable(std::vector<float>& field, int h, int w, double sigma) {
    const auto kernel = gaussian_kernel1d(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<float> tmp(field.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       field[static_cast<std::size_t>(y * w + xx)];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       tmp[static_cast<std::size_t>(yy * w + x)];
            }
            field[static_cast<std::size_t>(y * w + x)] = acc;
        }
}

// Uniform [-1,1] field smoothed by a Gaussian and scaled by alpha. The x
// field is drawn first, then the y field, both row-major.
void elastic_fields(const GeoParams& p, int h, int w, std::vector<float>& dx,
                    std::vector<float>& dy) {
    Rng rng(mix64(p.seed));
    dx.resize(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    dy.resize(dx.size());
    for (auto& v : dx) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (auto& v : dy) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    smooth_separable(dx, h, w, p.elastic_sigma);
    smooth_separable(dy, h, w, p.elastic_sigma);
    for (auto& v : dx) v *= static_cast<float>(p.elastic_alpha);
    for (auto& v : dy) v *= static_cast<float>(p.elastic_alpha);
}

}  // namespace

Tensor32 apply_geo(const Tensor32& image_or_mask, const GeoParams& params, Interp interp) {
    params.validate();
    require(image_or_mask.rank() == 2 || (image_or_mask.rank() == 3 && image_or_mask.dim(0) == 1),
            "apply_geo: input must be [H,W] or [1,H,W]");
    const int h = image_or_mask.dim(image_or_mask.rank() - 2);
    const int w = image_or_mask.dim(image_or_mask.rank() - 1);
    const float* src = image_or_mask.data().data();

    const Mat2 inv = affine_matrix(params).inverse();
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double tx = params.translate_x * static_cast<double>(w);
    const double ty = params.translate_y * static_cast<double>(h);

    std::vector<float> dx, dy;
    const bool elastic = params.elastic_alpha > 0.0;
    if (elastic) elastic_fields(params, h, w, dx, dy);

    std::vector<float> out(image_or_mask.data().size(), 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double px = static_cast<double>(x) - cx - tx;
            double py = static_cast<double>(y) - cy - ty;
            double sx = inv.a * px + inv.b * py + cx;
            double sy = inv.c * px + inv.d * py + cy;
            if (elastic) {
                sx += dx[static_cast<std::size_t>(y * w + x)];
                sy += dy[static_cast<std::size_t>(y * w + x)];
            }
            float v = 0.0f;
            if (interp == Interp::kNearest) {
                const int ix = static_cast<int>(std::floor(sx + 0.5));
                const int iy = static_cast<int>(std::floor(sy + 0.5));
                if (ix >= 0 && ix < w && iy >= 0 && iy < h)
                    v = src[static_cast<std::size_t>(iy * w + ix)];
            } else {
                const int x0 = static_cast<int>(std::floor(sx));
                const int y0 = static_cast<int>(std::floor(sy));
                const float fx = static_cast<float>(sx - std::floor(sx));
                const float fy = static_cast<float>(sy - std::floor(sy));
                auto sample = [&](int yy, int xx) -> float {
                    if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0f;
                    return src[static_cast<std::size_t>(yy * w + xx)];
                };
                v = (1.0f - fy) * ((1.0f - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                    fy * ((1.0f - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
            }
            out[static_cast<std::size_t>(y * w + x)] = v;
        }
    return Tensor32::from_data(image_or_mask.shape(), std::move(out));
}

Tensor32 apply_gamma(const Tensor32& image, const IntParams& params) {
    require(params.gamma > 0.0, "apply_gamma: gamma must be > 0");
    std::vector<float> out(image.data().size());
    const float g = static_cast<float>(params.gamma);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const float v = image.data()[i];
        require(v >= 0.0f, "apply_gamma: image values must be >= 0 (normalize first)");
        out[i] = std::pow(v, g);
    }
    return Tensor32::from_data(image.shape(), std::move(out));
}

std::pair<Tensor32, Tensor32> make_query(const Tensor32& support_image,
                                         const Tensor32& support_mask, const GeoParams& geo,
                                         const IntParams& intensity) {
    Tensor32 query_image = apply_geo(apply_gamma(support_image, intensity), geo, Interp::kBilinear);
    Tensor32 query_gt = apply_geo(support_mask, geo, Interp::kNearest);
    return {std::move(query_image), std::move(query_gt)};
}

GeoParams sample_geo(const GeoRanges& ranges, Rng& rng) {
    require(ranges.scale_min > 0.0 && ranges.scale_max >= ranges.scale_min,
            "geo ranges: bad scale interval");
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    GeoParams p;
    p.rotation = rng.uniform(-ranges.rotation_deg, ranges.rotation_deg) * kDeg;
    p.translate_x = rng.uniform(-ranges.translation, ranges.translation);
    p.translate_y = rng.uniform(-ranges.translation, ranges.translation);
    p.scale_x = rng.uniform(ranges.scale_min, ranges.scale_max);
    p.scale_y = rng.uniform(ranges.scale_min, ranges.scale_max);
    p.shear = rng.uniform(-ranges.shear_deg, ranges.shear_deg) * kDeg;
    p.elastic_alpha = ranges.elastic_alpha;
    p.elastic_sigma = ranges.elastic_sigma;
    p.seed = rng.next_u64();
    return p;
}

IntParams sample_int(const IntRanges& ranges, Rng& rng) {
    require(ranges.gamma_min > 0.0 && ranges.gamma_max >= ranges.gamma_min,
            "int ranges: bad gamma interval");
    IntParams p;
    p.gamma = std::exp(rng.uniform(std::log(ranges.gamma_min), std::log(ranges.gamma_max)));
    p.seed = rng.next_u64();
    return p;
}

}  // namespace cowpro
