#pragma once

// Naive reference for the graph-based segmentation: components tracked as a
// plain label array with linear rescans, edges ordered by selection instead
// of sorting machinery. Shares only the preprocessing (normalize + smooth)
// with the library; graph construction, ordering, merging and relabeling are
// reimplemented here.

#include <cmath>
#include <cstdint>
#include <vector>

namespace oracle {

struct FelzEdge {
    int a, b;
    float weight;
    int index;
};

// Same grid-edge enumeration contract: right, down, down-right, down-left,
// pixel-major, weight = 255 * |intensity difference|.
inline std::vector<FelzEdge> felz_edges(const std::vector<float>& img, int h, int w) {
    std::vector<FelzEdge> edges;
    int index = 0;
    auto push = [&](int ay, int ax, int by, int bx) {
        const int a = ay * w + ax, b = by * w + bx;
        edges.push_back({a, b, 255.0f * std::abs(img[static_cast<std::size_t>(a)] -
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

// O(E^2 + E*N): repeatedly select the smallest remaining edge by
// (weight, construction index), merge by relabeling scans.
inline std::vector<int> felz_reference(const std::vector<float>& img, int h, int w, double k,
                                       int min_size) {
    const int n = h * w;
    std::vector<FelzEdge> edges = felz_edges(img, h, w);
    std::vector<bool> used(edges.size(), false);

    auto next_edge = [&]() -> int {
        int best = -1;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            if (used[i]) continue;
            if (best < 0 || edges[i].weight < edges[static_cast<std::size_t>(best)].weight ||
                (edges[i].weight == edges[static_cast<std::size_t>(best)].weight &&
                 edges[i].index < edges[static_cast<std::size_t>(best)].index))
                best = static_cast<int>(i);
        }
        return best;
    };

    std::vector<int> comp(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) comp[static_cast<std::size_t>(i)] = i;
    // per-component: size and the weight of its last merge
    std::vector<int> size(static_cast<std::size_t>(n), 1);
    std::vector<double> internal(static_cast<std::size_t>(n), 0.0);

    std::vector<int> order;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const int e = next_edge();
        used[static_cast<std::size_t>(e)] = true;
        order.push_back(e);
    }

    auto merge = [&](int ca, int cb, double weight) {
        for (int i = 0; i < n; ++i)
            if (comp[static_cast<std::size_t>(i)] == cb) comp[static_cast<std::size_t>(i)] = ca;
        size[static_cast<std::size_t>(ca)] += size[static_cast<std::size_t>(cb)];
        internal[static_cast<std::size_t>(ca)] = weight;
    };

    for (int e : order) {
        const int ca = comp[static_cast<std::size_t>(edges[static_cast<std::size_t>(e)].a)];
        const int cb = comp[static_cast<std::size_t>(edges[static_cast<std::size_t>(e)].b)];
        if (ca == cb) continue;
        const double wgt = static_cast<double>(edges[static_cast<std::size_t>(e)].weight);
        const double ta = internal[static_cast<std::size_t>(ca)] + k / size[static_cast<std::size_t>(ca)];
        const double tb = internal[static_cast<std::size_t>(cb)] + k / size[static_cast<std::size_t>(cb)];
        if (wgt <= ta && wgt <= tb) merge(ca, cb, wgt);
    }
    for (int e : order) {
        const int ca = comp[static_cast<std::size_t>(edges[static_cast<std::size_t>(e)].a)];
        const int cb = comp[static_cast<std::size_t>(edges[static_cast<std::size_t>(e)].b)];
        if (ca == cb) continue;
        if (size[static_cast<std::size_t>(ca)] < min_size || size[static_cast<std::size_t>(cb)] < min_size)
            merge(ca, cb, static_cast<double>(edges[static_cast<std::size_t>(e)].weight));
    }

    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    std::vector<int> out(static_cast<std::size_t>(n));
    int next = 0;
    for (int i = 0; i < n; ++i) {
        const int c = comp[static_cast<std::size_t>(i)];
        if (remap[static_cast<std::size_t>(c)] < 0) remap[static_cast<std::size_t>(c)] = next++;
        out[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(c)];
    }
    return out;
}

}  // namespace oracle
