#include "cowpro/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cowpro/rng.hpp"

namespace cowpro {

namespace {

struct Edge {
    int a;
    int b;
    float weight;
    int index;  // construction order, the deterministic tie-break
};

struct UnionFind {
    std::vector<int> parent;
    std::vector<int> size;

    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)), size(static_cast<std::size_t>(n), 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }

    // Returns the new root.
    int join(int a, int b) {
        if (size[static_cast<std::size_t>(a)] < size[static_cast<std::size_t>(b)]) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
        size[static_cast<std::size_t>(a)] += size[static_cast<std::size_t>(b)];
        return a;
    }
};

std::vector<float> gaussian_kernel(double sigma) {
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

// Separable smoothing with replicated borders.
std::vector<float> smooth(const std::vector<float>& img, int h, int w, double sigma) {
    if (sigma <= 0.0) return img;
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<float> tmp(img.size()), out(img.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) {
                const int xx = std::clamp(x + i, 0, w - 1);
                acc += kernel[static_cast<std::size_t>(i + radius)] * img[static_cast<std::size_t>(y * w + xx)];
            }
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i) {
                const int yy = std::clamp(y + i, 0, h - 1);
                acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[static_cast<std::size_t>(yy * w + x)];
            }
            out[static_cast<std::size_t>(y * w + x)] = acc;
        }
    return out;
}

// Edge weights live on a 0-255 intensity scale so the default merge
// threshold k behaves like the algorithm's usual parameterization.
std::vector<Edge> build_edges(const std::vector<float>& img, int h, int w) {
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(4) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
    int index = 0;
    auto push = [&](int ay, int ax, int by, int bx) {
        const int a = ay * w + ax;
        const int b = by * w + bx;
        edges.push_back({a, b,
                         255.0f * std::abs(img[static_cast<std::size_t>(a)] -
                                           img[static_cast<std::size_t>(b)]),
                         index++});
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) push(y, x, y, x + 1);
            if (y + 1 < h) push(y, x, y + 1, x);
            if (y + 1 < h && x + 1 < w) push(y, x, y + 1, x + 1);
            if (y + 1 < h && x > 0) push(y, x, y + 1, x - 1);
        }
    return edges;
}

}  // namespace

int FelzParams::resolved_min_size(int h, int w) const {
    if (min_size > 0) return min_size;
    const double scaled = 400.0 * static_cast<double>(h) * static_cast<double>(w) / (256.0 * 256.0);
    return std::max(1, static_cast<int>(std::lround(scaled)));
}

int LabelMap::segment_size(int id) const {
    int n = 0;
    for (int v : labels) n += v == id;
    return n;
}

int default_min_fg_pixels(int h, int w) {
    const double scaled = 100.0 * static_cast<double>(h) * static_cast<double>(w) / (256.0 * 256.0);
    return std::max(1, static_cast<int>(std::lround(scaled)));
}

std::vector<float> felz_preprocess(const Tensor32& image, double sigma, int& h, int& w) {
    require(image.rank() == 2 || (image.rank() == 3 && image.dim(0) == 1),
            "felzenszwalb: image must be [H,W] or [1,H,W]");
    h = image.dim(image.rank() - 2);
    w = image.dim(image.rank() - 1);
    require(h >= 1 && w >= 1, "felzenszwalb: empty image");

    float lo = image.data()[0], hi = image.data()[0];
    for (float v : image.data()) {
        require(std::isfinite(v), "felzenszwalb: image must be finite");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<float> norm(image.data().size(), 0.0f);
    if (hi > lo) {
        const float inv = 1.0f / (hi - lo);
        for (std::size_t i = 0; i < norm.size(); ++i) norm[i] = (image.data()[i] - lo) * inv;
    }
    return smooth(norm, h, w, sigma);
}

LabelMap felzenszwalb(const Tensor32& image, const FelzParams& params) {
    require(params.scale > 0.0, "felzenszwalb: scale must be > 0");
    require(params.sigma >= 0.0, "felzenszwalb: sigma must be >= 0");
    int h = 0, w = 0;
    const std::vector<float> img = felz_preprocess(image, params.sigma, h, w);
    const int n = h * w;
    const int min_size = params.resolved_min_size(h, w);
    const double k = params.scale;

    std::vector<Edge> edges = build_edges(img, h, w);
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        return a.index < b.index;
    });

    UnionFind uf(n);
    // threshold[root] = max internal edge weight + k/|component|
    std::vector<double> threshold(static_cast<std::size_t>(n), k);
    for (const Edge& e : edges) {
        const int ra = uf.find(e.a);
        const int rb = uf.find(e.b);
        if (ra == rb) continue;
        const double wgt = static_cast<double>(e.weight);
        if (wgt <= threshold[static_cast<std::size_t>(ra)] && wgt <= threshold[static_cast<std::size_t>(rb)]) {
            const int root = uf.join(ra, rb);
            threshold[static_cast<std::size_t>(root)] =
                wgt + k / static_cast<double>(uf.size[static_cast<std::size_t>(root)]);
        }
    }
    // Absorb undersized components along the smallest boundary edges.
    for (const Edge& e : edges) {
        const int ra = uf.find(e.a);
        const int rb = uf.find(e.b);
        if (ra == rb) continue;
        if (uf.size[static_cast<std::size_t>(ra)] < min_size || uf.size[static_cast<std::size_t>(rb)] < min_size)
            uf.join(ra, rb);
    }

    LabelMap out;
    out.h = h;
    out.w = w;
    out.labels.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        const int root = uf.find(i);
        if (remap[static_cast<std::size_t>(root)] < 0) remap[static_cast<std::size_t>(root)] = next++;
        out.labels[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(root)];
    }
    out.num_segments = next;
    return out;
}

std::optional<Tensor32> sample_pseudo_mask(const LabelMap& labels, std::uint64_t seed,
                                           int min_fg_pixels) {
    require(labels.num_segments >= 1 && !labels.labels.empty(), "sample_pseudo_mask: empty label map");
    require(min_fg_pixels >= 1, "sample_pseudo_mask: min_fg_pixels must be >= 1");
    std::vector<int> sizes(static_cast<std::size_t>(labels.num_segments), 0);
    for (int v : labels.labels) ++sizes[static_cast<std::size_t>(v)];

    Rng rng(mix64(seed));
    for (int attempt = 0; attempt < labels.num_segments; ++attempt) {
        const int pick = static_cast<int>(rng.randint(labels.num_segments));
        if (sizes[static_cast<std::size_t>(pick)] < min_fg_pixels) continue;
        std::vector<float> mask(labels.labels.size());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = labels.labels[i] == pick ? 1.0f : 0.0f;
        return Tensor32::from_data({labels.h, labels.w}, std::move(mask));
    }
    return std::nullopt;
}

}  // namespace cowpro
