#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cowpro/encoder.hpp"
#include "cowpro/rng.hpp"

using namespace cowpro;

namespace {

Tensor64 random_image(Rng& rng, int c, int s) {
    std::vector<double> v(static_cast<std::size_t>(c) * s * s);
    for (auto& x : v) x = rng.uniform(0.0, 1.0);
    return Tensor64::from_data({c, s, s}, std::move(v));
}

}  // namespace

TEST_CASE("same seed gives identical weights, different seeds differ") {
    EncoderConfig cfg;
    auto a = init_weights<double>(cfg, 123);
    auto b = init_weights<double>(cfg, 123);
    auto c = init_weights<double>(cfg, 124);
    REQUIRE(a.params.size() == b.params.size());
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        CHECK(a.params[i].second.data() == b.params[i].second.data());
        any_diff = any_diff || a.params[i].second.data() != c.params[i].second.data();
    }
    CHECK(any_diff);
}

TEST_CASE("parameter count matches the closed-form sum") {
    EncoderConfig cfg;
    // conv k*k*cin*cout + cout per block, k=3
    std::int64_t expect = 0;
    int cin = cfg.in_channels;
    for (int i = 0; i < 4; ++i) {
        expect += 9LL * cin * cfg.block_channels[static_cast<std::size_t>(i)] +
                  cfg.block_channels[static_cast<std::size_t>(i)];
        cin = cfg.block_channels[static_cast<std::size_t>(i)];
    }
    CHECK(cfg.param_count() == expect);
    CHECK(expect == 60224);

    auto w = init_weights<double>(cfg, 5);
    std::int64_t total = 0;
    for (const auto& [name, p] : w.params) total += p.numel();
    CHECK(total == expect);
}

TEST_CASE("output spatial extent is input/8 and the forward is deterministic") {
    EncoderConfig cfg;
    auto w = init_weights<double>(cfg, 7);
    Rng rng(19);
    for (const int s : {16, 64}) {
        auto img = random_image(rng, 1, s);
        auto f1 = encode(w, img);
        auto f2 = encode(w, img);
        CHECK(f1.shape() == Shape{cfg.feature_dim, s / 8, s / 8});
        CHECK(f1.data() == f2.data());
    }
    CHECK_THROWS_AS(encode(w, random_image(rng, 1, 20)), ValidationError);
}

TEST_CASE("dilation with matching padding preserves extent") {
    EncoderConfig dilated;  // dilations {1,1,2,4}
    EncoderConfig plain;
    plain.dilations = {1, 1, 1, 1};
    auto wd = init_weights<double>(dilated, 3);
    auto wp = init_weights<double>(plain, 3);
    Rng rng(23);
    auto img = random_image(rng, 1, 32);
    CHECK(encode(wd, img).shape() == encode(wp, img).shape());
}

TEST_CASE("feature-sum gradient w.r.t. a conv kernel matches finite differences") {
    EncoderConfig cfg;
    cfg.block_channels = {3, 4, 5, 5};
    cfg.feature_dim = 5;
    auto w = init_weights<double>(cfg, 11);
    Rng rng(29);
    auto img = random_image(rng, 1, 16);

    auto loss_of = [&]() { return sum_all(encode(w, img)); };
    backward(loss_of());
    auto& kernel = w.params[2].second;  // block1 weight
    const auto analytic = kernel.grad();

    const double eps = 1e-5;
    int checked = 0;
    for (std::size_t j = 0; j < analytic.size() && checked < 20; j += analytic.size() / 20, ++checked) {
        const double keep = kernel.data()[j];
        kernel.mutable_data()[j] = keep + eps;
        const double fp = loss_of().item();
        kernel.mutable_data()[j] = keep - eps;
        const double fm = loss_of().item();
        kernel.mutable_data()[j] = keep;
        const double fd = (fp - fm) / (2 * eps);
        const double rel = std::abs(analytic[j] - fd) / std::max({1.0, std::abs(analytic[j]), std::abs(fd)});
        CHECK(rel < 1e-4);
    }
}

TEST_CASE("config validation rejects bad geometry") {
    EncoderConfig cfg;
    cfg.strides = {2, 2, 2, 2};  // reduction 16
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    EncoderConfig cfg2;
    cfg2.feature_dim = 32;  // mismatch with last block
    CHECK_THROWS_AS(cfg2.validate(), ValidationError);
}
