#pragma once

#include <chrono>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cowpro/encoder.hpp"
#include "cowpro/head.hpp"
#include "cowpro/ops.hpp"
#include "cowpro/rng.hpp"
#include "cowpro/training.hpp"

// Central finite-difference verification of every differentiable op and of
// the composed encoder+head loss, at 64-bit precision. Exposed both to the
// test suite and to the `gradcheck` CLI subcommand.

namespace cowpro {

struct GradCheckReport {
    int checks = 0;
    int failures = 0;
    double worst_rel_err = 0.0;
    double seconds = 0.0;
};

namespace gradcheck_detail {

// Builds a scalar loss from fresh leaf tensors; must be a pure function of
// the leaf data so the finite-difference re-evaluations are meaningful.
using LossBuilder = std::function<Tensor64(std::vector<Tensor64>&)>;

inline double rel_err(double a, double b) {
    const double denom = std::max({1.0, std::abs(a), std::abs(b)});
    return std::abs(a - b) / denom;
}

// Returns the worst relative error between analytic and central-difference
// gradients over every coordinate of every input.
inline double check_loss(const LossBuilder& build, const std::vector<std::vector<double>>& data,
                         const std::vector<Shape>& shapes, double eps) {
    auto make_leaves = [&](int perturb_input, std::size_t perturb_coord, double delta) {
        std::vector<Tensor64> leaves;
        for (std::size_t i = 0; i < data.size(); ++i) {
            std::vector<double> d = data[i];
            if (static_cast<int>(i) == perturb_input) d[perturb_coord] += delta;
            leaves.push_back(Tensor64::from_data(shapes[i], std::move(d), true));
        }
        return leaves;
    };

    std::vector<Tensor64> leaves = make_leaves(-1, 0, 0.0);
    Tensor64 loss = build(leaves);
    backward(loss);

    double worst = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::vector<double> analytic = leaves[i].grad();
        for (std::size_t j = 0; j < data[i].size(); ++j) {
            auto lp = make_leaves(static_cast<int>(i), j, eps);
            auto lm = make_leaves(static_cast<int>(i), j, -eps);
            const double fp = build(lp).item();
            const double fm = build(lm).item();
            const double fd = (fp - fm) / (2.0 * eps);
            worst = std::max(worst, rel_err(analytic[j], fd));
        }
    }
    return worst;
}

inline std::vector<double> random_vec(Rng& rng, std::int64_t n, double lo, double hi) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Random values bounded away from zero, for ops with a kink at 0.
inline std::vector<double> random_vec_off_zero(Rng& rng, std::int64_t n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) {
        const double mag = rng.uniform(0.1, 1.0);
        x = rng.uniform01() < 0.5 ? -mag : mag;
    }
    return v;
}

}  // namespace gradcheck_detail

// Runs the whole suite; one log line per op. `seeds` independent random
// draws per check, relative error must stay below `tol`.
inline GradCheckReport run_gradient_suite(std::ostream& log, int seeds = 10, double tol = 1e-4,
                                          double eps = 1e-3) {
    using namespace gradcheck_detail;
    const auto t0 = std::chrono::steady_clock::now();
    GradCheckReport report;

    auto run = [&](const std::string& name,
                   const std::function<double(Rng&)>& one_seed) {
        double worst = 0.0;
        for (int s = 0; s < seeds; ++s) {
            Rng rng(mix64(0xABCD0000 + static_cast<std::uint64_t>(s) * 977 +
                          static_cast<std::uint64_t>(std::hash<std::string>{}(name))));
            worst = std::max(worst, one_seed(rng));
        }
        ++report.checks;
        report.worst_rel_err = std::max(report.worst_rel_err, worst);
        const bool ok = worst < tol;
        if (!ok) ++report.failures;
        log << (ok ? "[PASS] " : "[FAIL] ") << "grad " << name << "  max rel err " << worst << "\n";
    };

    // Weighted-sum reduction to a scalar. The weights are drawn on the first
    // call and cached so every finite-difference re-evaluation sees the very
    // same loss function.
    auto make_wsum = [](Rng r) {
        auto cache = std::make_shared<std::vector<double>>();
        return [cache, r](const Tensor64& t) mutable {
            if (cache->empty()) {
                cache->resize(static_cast<std::size_t>(t.numel()));
                for (auto& x : *cache) x = r.uniform(-1.0, 1.0);
            }
            return sum_all(mul(t, Tensor64::from_data(t.shape(), *cache)));
        };
    };

    run("add", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(add(in[0], in[1])); },
            {random_vec(rng, 12, -1, 1), random_vec(rng, 12, -1, 1)}, {{3, 4}, {3, 4}}, eps);
    });
    run("sub", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(sub(in[0], in[1])); },
            {random_vec(rng, 12, -1, 1), random_vec(rng, 12, -1, 1)}, {{3, 4}, {3, 4}}, eps);
    });
    run("mul", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(mul(in[0], in[1])); },
            {random_vec(rng, 12, -1, 1), random_vec(rng, 12, -1, 1)}, {{3, 4}, {3, 4}}, eps);
    });
    run("scale", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(scale(in[0], 1.7)); },
            {random_vec(rng, 12, -1, 1)}, {{3, 4}}, eps);
    });
    run("relu", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(relu(in[0])); },
            {random_vec_off_zero(rng, 20)}, {{4, 5}}, eps);
    });
    run("elem_log", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(elem_log(in[0])); },
            {random_vec(rng, 12, 0.1, 2.0)}, {{3, 4}}, eps);
    });
    run("elem_exp", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(elem_exp(in[0])); },
            {random_vec(rng, 12, -1, 1)}, {{3, 4}}, eps);
    });
    run("sum_all", [&](Rng& rng) {
        return check_loss([&](std::vector<Tensor64>& in) { return sum_all(in[0]); },
                          {random_vec(rng, 12, -1, 1)}, {{3, 4}}, eps);
    });
    run("mean_all", [&](Rng& rng) {
        return check_loss([&](std::vector<Tensor64>& in) { return mean_all(in[0]); },
                          {random_vec(rng, 12, -1, 1)}, {{3, 4}}, eps);
    });
    run("matmul", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(matmul(in[0], in[1])); },
            {random_vec(rng, 12, -1, 1), random_vec(rng, 8, -1, 1)}, {{3, 4}, {4, 2}}, eps);
    });
    run("conv2d(dilated)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(conv2d(in[0], in[1], 1, 2, 2));
            },
            {random_vec(rng, 2 * 5 * 5, -1, 1), random_vec(rng, 3 * 2 * 3 * 3, -1, 1)},
            {{2, 5, 5}, {3, 2, 3, 3}}, eps);
    });
    run("conv2d(strided)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(conv2d(in[0], in[1], 2, 1, 1));
            },
            {random_vec(rng, 2 * 6 * 6, -1, 1), random_vec(rng, 2 * 2 * 3 * 3, -1, 1)},
            {{2, 6, 6}, {2, 2, 3, 3}}, eps);
    });
    run("add_channel_bias", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(add_channel_bias(in[0], in[1])); },
            {random_vec(rng, 3 * 4 * 4, -1, 1), random_vec(rng, 3, -1, 1)}, {{3, 4, 4}, {3}}, eps);
    });
    run("avg_pool2d", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(avg_pool2d(in[0], 2)); },
            {random_vec(rng, 2 * 6 * 6, -1, 1)}, {{2, 6, 6}}, eps);
    });
    run("avg_pool2d(padded)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(avg_pool2d(in[0], 2)); },
            {random_vec(rng, 1 * 5 * 5, -1, 1)}, {{1, 5, 5}}, eps);
    });
    run("bilinear_resize(up)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(bilinear_resize(in[0], 7, 5)); },
            {random_vec(rng, 2 * 4 * 4, -1, 1)}, {{2, 4, 4}}, eps);
    });
    run("bilinear_resize(down)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(bilinear_resize(in[0], 2, 3)); },
            {random_vec(rng, 2 * 4 * 4, -1, 1)}, {{2, 4, 4}}, eps);
    });
    run("softmax(axis0)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(softmax(in[0], 0, 0.5)); },
            {random_vec(rng, 15, -1, 1)}, {{3, 5}}, eps);
    });
    run("softmax(axis1)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(softmax(in[0], 1, 1.0)); },
            {random_vec(rng, 15, -1, 1)}, {{3, 5}}, eps);
    });
    run("weighted_cross_entropy", [&](Rng& rng) {
        std::vector<double> target(16);
        for (auto& t : target) t = rng.uniform01() < 0.5 ? 0.0 : 1.0;
        auto tgt = target;
        return check_loss(
            [tgt](std::vector<Tensor64>& in) {
                return weighted_cross_entropy(in[0], Tensor64::from_data({4, 4}, tgt), 0.05, 1.0);
            },
            {random_vec(rng, 2 * 16, 0.1, 0.9)}, {{2, 4, 4}}, eps);
    });
    run("center_channels(bag)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(center_channels(in[0])); },
            {random_vec(rng, 24, -1, 1)}, {{4, 6}}, eps);
    });
    run("center_channels(map)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(center_channels(in[0])); },
            {random_vec(rng, 3 * 4 * 4, -1, 1)}, {{3, 4, 4}}, eps);
    });
    run("masked_mean", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        std::vector<double> wts = random_vec(rng, 16, 0.0, 1.0);
        return check_loss(
            [&, wts](std::vector<Tensor64>& in) {
                return ws(masked_mean(in[0], Tensor64::from_data({4, 4}, wts)));
            },
            {random_vec(rng, 3 * 16, -1, 1)}, {{3, 4, 4}}, eps);
    });
    run("gather_pixels", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        const std::vector<int> idx{0, 5, 7, 15, 2};
        return check_loss(
            [&, idx](std::vector<Tensor64>& in) { return ws(gather_pixels(in[0], idx)); },
            {random_vec(rng, 3 * 16, -1, 1)}, {{3, 4, 4}}, eps);
    });
    run("concat_cols", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(concat_cols(in[0], in[1])); },
            {random_vec(rng, 6, -1, 1), random_vec(rng, 12, -1, 1)}, {{3, 2}, {3, 4}}, eps);
    });
    run("stack0/index_axis0", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(index_axis0(stack0<double>({in[0], in[1]}), 1));
            },
            {random_vec(rng, 12, -1, 1), random_vec(rng, 12, -1, 1)}, {{3, 4}, {3, 4}}, eps);
    });
    run("bag_correlation(cosine)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(bag_correlation(in[0], in[1], true));
            },
            {random_vec(rng, 4 * 9, -1, 1), random_vec(rng, 4 * 5, -1, 1)}, {{4, 3, 3}, {4, 5}},
            eps);
    });
    run("bag_correlation(dot)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(bag_correlation(in[0], in[1], false));
            },
            {random_vec(rng, 4 * 9, -1, 1), random_vec(rng, 4 * 5, -1, 1)}, {{4, 3, 3}, {4, 5}},
            eps);
    });
    run("bag_aggregate", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(bag_aggregate(in[0], in[1])); },
            {random_vec(rng, 3 * 4, -1, 1), random_vec(rng, 4 * 9, 0.05, 1.0)},
            {{3, 4}, {4, 3, 3}}, eps);
    });
    run("pixel_similarity(cosine)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(pixel_similarity(in[0], in[1], true));
            },
            {random_vec(rng, 4 * 9, -1, 1), random_vec(rng, 4 * 9, -1, 1)},
            {{4, 3, 3}, {4, 3, 3}}, eps);
    });
    run("pixel_similarity(dot)", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        return check_loss(
            [&](std::vector<Tensor64>& in) {
                return ws(pixel_similarity(in[0], in[1], false));
            },
            {random_vec(rng, 4 * 9, -1, 1), random_vec(rng, 4 * 9, -1, 1)},
            {{4, 3, 3}, {4, 3, 3}}, eps);
    });
    run("softmax_topk", [&](Rng& rng) {
        auto ws = make_wsum(rng.fork(1));
        // keep per-pixel values separated so the finite-difference step
        // cannot flip the kept set (the selection is locally constant)
        std::vector<double> vals(5 * 9);
        for (int p = 0; p < 9; ++p) {
            bool ok = false;
            while (!ok) {
                for (int j = 0; j < 5; ++j) vals[static_cast<std::size_t>(j * 9 + p)] = rng.uniform(-1, 1);
                ok = true;
                for (int a = 0; a < 5 && ok; ++a)
                    for (int b = a + 1; b < 5 && ok; ++b)
                        ok = std::abs(vals[static_cast<std::size_t>(a * 9 + p)] -
                                      vals[static_cast<std::size_t>(b * 9 + p)]) > 0.02;
            }
        }
        return check_loss(
            [&](std::vector<Tensor64>& in) { return ws(softmax_topk(in[0], 0.7, 2)); },
            {vals}, {{5, 3, 3}}, eps);
    });

    // Composed encoder+head+loss on a miniature configuration: gradients
    // w.r.t. every encoder parameter and every image pixel.
    run("encoder+head+loss", [&](Rng& rng) {
        EncoderConfig cfg;
        cfg.block_channels = {4, 6, 8, 8};
        cfg.feature_dim = 8;
        HeadConfig head;
        head.temperature = 0.5;
        head.logit_scale = 5.0;

        const int s = 16;
        std::vector<double> sup_mask(s * s, 0.0);
        for (int y = 4; y < 12; ++y)
            for (int x = 3; x < 10; ++x) sup_mask[static_cast<std::size_t>(y * s + x)] = 1.0;
        std::vector<double> gt = sup_mask;
        const Tensor64 mask_t = Tensor64::from_data({s, s}, sup_mask);
        const Tensor64 gt_t = Tensor64::from_data({s, s}, gt);

        EncoderWeights<double> proto = init_weights<double>(cfg, rng.next_u64());
        std::vector<std::vector<double>> data;
        std::vector<Shape> shapes;
        for (auto& [name, p] : proto.params) {
            data.push_back(p.data());
            shapes.push_back(p.shape());
        }
        data.push_back(random_vec(rng, s * s, 0.0, 1.0));
        shapes.push_back({1, s, s});
        data.push_back(random_vec(rng, s * s, 0.0, 1.0));
        shapes.push_back({1, s, s});

        auto build = [&, mask_t, gt_t, cfg, head](std::vector<Tensor64>& in) {
            EncoderWeights<double> w;
            w.config = cfg;
            std::size_t i = 0;
            for (auto& [name, p] : proto.params) w.params.emplace_back(name, in[i++]);
            Tensor64 sup_feat = encode(w, in[i]);
            Tensor64 qry_feat = encode(w, in[i + 1]);
            HeadOutput<double> out = head_forward(sup_feat, mask_t, qry_feat, head);
            return ssl_loss(out.fg_prob, gt_t, 0.05, 1.0);
        };
        // A smaller step keeps the probability of straddling a relu kink
        // negligible; at 64 bits the difference quotient is still clean.
        return check_loss(build, data, shapes, 1e-5);
    });

    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace cowpro
