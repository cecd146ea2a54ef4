#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cowpro/ops.hpp"
#include "cowpro/rng.hpp"
#include "oracles/naive_ops.hpp"

using namespace cowpro;

namespace {

std::vector<double> random_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("conv2d box sum on an all-ones image") {
    auto img = Tensor64::full({1, 3, 3}, 1.0);
    auto ker = Tensor64::full({1, 1, 3, 3}, 1.0);
    auto out = conv2d(img, ker, 1, 1, 1);
    CHECK(out.shape() == Shape{1, 3, 3});
    CHECK(out.data()[4] == doctest::Approx(9.0));   // center
    CHECK(out.data()[0] == doctest::Approx(4.0));   // corner
    CHECK(out.data()[1] == doctest::Approx(6.0));   // edge
}

TEST_CASE("conv2d identity kernel") {
    Rng rng(3);
    auto img = Tensor64::from_data({2, 4, 4}, random_vec(rng, 32));
    auto ker = Tensor64::zeros({2, 2, 1, 1});
    ker.mutable_data()[0] = 1.0;  // out0 <- in0
    ker.mutable_data()[3] = 1.0;  // out1 <- in1
    auto out = conv2d(img, ker, 1, 0, 1);
    for (std::size_t i = 0; i < out.data().size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(img.data()[i]));
}

TEST_CASE("conv2d dilated matches the six-loop reference") {
    Rng rng(11);
    for (int seed = 0; seed < 5; ++seed) {
        const auto in = random_vec(rng, 2 * 5 * 5);
        const auto ker = random_vec(rng, 3 * 2 * 3 * 3);
        auto out = conv2d(Tensor64::from_data({2, 5, 5}, in),
                          Tensor64::from_data({3, 2, 3, 3}, ker), 1, 2, 2);
        const auto ref = oracle::conv2d(in, 2, 5, 5, ker, 3, 3, 3, 1, 2, 2);
        REQUIRE(out.data().size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(out.data()[i] - ref[i]) < 1e-6);
    }
}

TEST_CASE("conv2d rejects channel mismatch") {
    auto img = Tensor64::full({3, 4, 4}, 1.0);
    auto ker = Tensor64::full({1, 2, 3, 3}, 1.0);
    CHECK_THROWS_AS(conv2d(img, ker, 1, 1, 1), ValidationError);
}

TEST_CASE("avg_pool2d basics") {
    auto ones = Tensor64::full({1, 4, 4}, 1.0);
    auto pooled = avg_pool2d(ones, 4);
    CHECK(pooled.shape() == Shape{1, 1, 1});
    CHECK(pooled.data()[0] == doctest::Approx(1.0));

    auto single = Tensor64::zeros({1, 4, 4});
    single.mutable_data()[5] = 1.0;
    CHECK(avg_pool2d(single, 4).data()[0] == doctest::Approx(1.0 / 16.0));

    CHECK_THROWS_AS(avg_pool2d(ones, 0), ValidationError);
}

TEST_CASE("avg_pool2d matches the loop reference, including the padded case") {
    Rng rng(21);
    for (const int h : {8, 5}) {
        const auto in = random_vec(rng, 3 * h * 8);
        auto out = avg_pool2d(Tensor64::from_data({3, h, 8}, in), 2);
        const auto ref = oracle::avg_pool2d(in, 3, h, 8, 2);
        REQUIRE(out.data().size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("bilinear_resize identity and constants") {
    Rng rng(5);
    auto img = Tensor64::from_data({2, 5, 7}, random_vec(rng, 70));
    auto same = bilinear_resize(img, 5, 7);
    for (std::size_t i = 0; i < img.data().size(); ++i) CHECK(same.data()[i] == img.data()[i]);

    auto constant = Tensor64::full({1, 3, 3}, 0.73);
    auto widened = bilinear_resize(constant, 9, 4);
    for (double v : widened.data()) CHECK(v == doctest::Approx(0.73));
}

TEST_CASE("bilinear_resize half-pixel hand values") {
    auto line = Tensor64::from_data({1, 1, 2}, {0.0, 1.0});
    auto out = bilinear_resize(line, 1, 4);
    CHECK(out.data()[0] == doctest::Approx(0.0));
    CHECK(out.data()[1] == doctest::Approx(0.25));
    CHECK(out.data()[2] == doctest::Approx(0.75));
    CHECK(out.data()[3] == doctest::Approx(1.0));
}

TEST_CASE("softmax closed forms and properties") {
    auto pair = softmax(Tensor64::from_data({2}, {0.0, 0.0}), 0, 1.0);
    CHECK(pair.data()[0] == doctest::Approx(0.5));

    auto two = softmax(Tensor64::from_data({2}, {std::log(2.0), 0.0}), 0, 1.0);
    CHECK(two.data()[0] == doctest::Approx(2.0 / 3.0));
    CHECK(two.data()[1] == doctest::Approx(1.0 / 3.0));

    CHECK_THROWS_AS(softmax(pair, 0, 0.0), ValidationError);

    Rng rng(9);
    for (int seed = 0; seed < 10; ++seed) {
        const auto logits = random_vec(rng, 7, -3, 3);
        const double t = rng.uniform(0.05, 2.0);
        auto y = softmax(Tensor64::from_data({7}, logits), 0, t);
        double sum = 0.0;
        std::size_t argmax_in = 0, argmax_out = 0;
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(y.data()[i] >= 0.0);
            sum += y.data()[i];
            if (logits[i] > logits[argmax_in]) argmax_in = i;
            if (y.data()[i] > y.data()[argmax_out]) argmax_out = i;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
        CHECK(argmax_in == argmax_out);
    }
}

TEST_CASE("weighted cross entropy closed forms") {
    // perfect prediction
    auto target = Tensor64::from_data({2, 2}, {1, 0, 1, 1});
    std::vector<double> probs(8, 0.0);
    for (int i = 0; i < 4; ++i) {
        const bool fg = target.data()[static_cast<std::size_t>(i)] == 1.0;
        probs[static_cast<std::size_t>(fg ? 4 + i : i)] = 1.0;
    }
    CHECK(weighted_cross_entropy(Tensor64::from_data({2, 2, 2}, probs), target, 0.05, 1.0).item() ==
          doctest::Approx(0.0));

    // uniform prediction, all-foreground target, weights (0.05, 1.0)
    auto uniform = Tensor64::full({2, 2, 2}, 0.5);
    auto all_fg = Tensor64::full({2, 2}, 1.0);
    CHECK(weighted_cross_entropy(uniform, all_fg, 0.05, 1.0).item() ==
          doctest::Approx(std::log(2.0)));

    CHECK_THROWS_AS(weighted_cross_entropy(uniform, Tensor64::full({3, 3}, 1.0), 0.05, 1.0),
                    ValidationError);
}

TEST_CASE("weighted cross entropy matches the scalar loop oracle") {
    Rng rng(33);
    for (int seed = 0; seed < 8; ++seed) {
        std::vector<double> probs = random_vec(rng, 2 * 12, 0.05, 0.95);
        std::vector<double> target(12);
        for (auto& t : target) t = rng.uniform01() < 0.5 ? 0.0 : 1.0;
        const double got = weighted_cross_entropy(Tensor64::from_data({2, 3, 4}, probs),
                                                  Tensor64::from_data({3, 4}, target), 0.05, 1.0)
                               .item();
        const double ref = oracle::weighted_cross_entropy(probs, target, 3, 4, 0.05, 1.0);
        CHECK(std::abs(got - ref) < 1e-8);
    }
}

TEST_CASE("matmul matches the triple loop") {
    Rng rng(17);
    const auto a = random_vec(rng, 12), b = random_vec(rng, 20);
    auto out = matmul(Tensor64::from_data({3, 4}, a), Tensor64::from_data({4, 5}, b));
    const auto ref = oracle::matmul(a, 3, 4, b, 5);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(out.data()[i] - ref[i]) < 1e-6);
    CHECK_THROWS_AS(matmul(Tensor64::full({3, 4}, 1.0), Tensor64::full({3, 4}, 1.0)),
                    ValidationError);
}

TEST_CASE("center_channels matches the loop reference and is idempotent") {
    Rng rng(29);
    const auto data = random_vec(rng, 4 * 6);
    auto x = Tensor64::from_data({4, 6}, data);
    auto c = center_channels(x);
    const auto ref = oracle::center_channels(data, 4, 6);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.data()[i] == doctest::Approx(ref[i]));

    auto cc = center_channels(c);
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(std::abs(cc.data()[i] - c.data()[i]) < 1e-12);

    // constant vector -> zero vector; per-column mean 0 within 1e-7
    auto constant = center_channels(Tensor64::full({5, 1}, 3.2));
    for (double v : constant.data()) CHECK(std::abs(v) < 1e-12);
    for (int col = 0; col < 6; ++col) {
        double m = 0.0;
        for (int j = 0; j < 4; ++j) m += c.data()[static_cast<std::size_t>(j * 6 + col)];
        CHECK(std::abs(m / 4.0) < 1e-7);
    }
}

TEST_CASE("masked_mean matches the loop reference and handles empty weights") {
    Rng rng(31);
    const auto feat = random_vec(rng, 3 * 16);
    const auto wts = random_vec(rng, 16, 0.0, 1.0);
    auto got = masked_mean(Tensor64::from_data({3, 4, 4}, feat), Tensor64::from_data({4, 4}, wts));
    const auto ref = oracle::masked_mean(feat, 3, 16, wts);
    for (int j = 0; j < 3; ++j) CHECK(got.data()[static_cast<std::size_t>(j)] == doctest::Approx(ref[static_cast<std::size_t>(j)]));

    auto zero = masked_mean(Tensor64::from_data({3, 4, 4}, feat), Tensor64::zeros({4, 4}));
    for (double v : zero.data()) CHECK(v == 0.0);
}

TEST_CASE("elementwise ops match scalar arithmetic") {
    Rng rng(37);
    const auto a = random_vec(rng, 10), b = random_vec(rng, 10);
    auto ta = Tensor64::from_data({10}, a), tb = Tensor64::from_data({10}, b);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(add(ta, tb).data()[i] == doctest::Approx(a[i] + b[i]));
        CHECK(sub(ta, tb).data()[i] == doctest::Approx(a[i] - b[i]));
        CHECK(mul(ta, tb).data()[i] == doctest::Approx(a[i] * b[i]));
        CHECK(relu(ta).data()[i] == doctest::Approx(std::max(0.0, a[i])));
        CHECK(elem_exp(ta).data()[i] == doctest::Approx(std::exp(a[i])));
    }
    const auto pos = random_vec(rng, 10, 0.01, 2.0);
    auto tp = Tensor64::from_data({10}, pos);
    for (std::size_t i = 0; i < 10; ++i)
        CHECK(elem_log(tp).data()[i] == doctest::Approx(std::log(pos[i])));
}

TEST_CASE("gather/concat/stack plumbing") {
    auto feat = Tensor64::from_data({2, 2, 2}, {0, 1, 2, 3, 10, 11, 12, 13});
    auto g = gather_pixels(feat, {3, 0});
    CHECK(g.shape() == Shape{2, 2});
    CHECK(g.data() == std::vector<double>{3, 0, 13, 10});

    auto cat = concat_cols(g, Tensor64::from_data({2, 1}, {7, 8}));
    CHECK(cat.shape() == Shape{2, 3});
    CHECK(cat.data() == std::vector<double>{3, 0, 7, 13, 10, 8});

    auto stacked = stack0<double>({Tensor64::full({2}, 1.0), Tensor64::full({2}, 2.0)});
    CHECK(stacked.shape() == Shape{2, 2});
    CHECK(index_axis0(stacked, 1).data() == std::vector<double>{2, 2});
}
