#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "voxbag/cnn/layers.hpp"
#include "voxbag/rng.hpp"

using namespace voxbag;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.count(); ++i) t[i] = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

}  // namespace

TEST_CASE("conv: all-ones 3x3x3 kernel over all-ones 3x3x3 input sums to 27") {
    ConvSpec spec;
    spec.in_ch = 1;
    spec.out_ch = 1;
    spec.pad_d = spec.pad_h = spec.pad_w = 0;
    ConvParams params;
    params.w = Tensor(Shape{1, 1, 3, 3, 3}, 1.0f);
    params.b = Tensor(Shape{1}, 0.0f);
    Tensor input(Shape{1, 1, 3, 3, 3}, 1.0f);
    auto out = conv_forward(input, spec, params);
    CHECK(out.shape() == Shape{1, 1, 1, 1, 1});
    CHECK(out[0] == 27.0f);
}

TEST_CASE("conv: centered delta kernel with pad 1 reproduces the input") {
    ConvSpec spec;  // defaults: 3x3x3, pad 1
    ConvParams params;
    params.w = Tensor(Shape{1, 1, 3, 3, 3}, 0.0f);
    params.w[(1 * 3 + 1) * 3 + 1] = 1.0f;  // center tap
    params.b = Tensor(Shape{1}, 0.0f);

    Rng rng(2);
    Tensor input = random_tensor(Shape{1, 1, 4, 4, 4}, rng);
    auto out = conv_forward(input, spec, params);
    REQUIRE(out.shape() == input.shape());
    for (std::size_t i = 0; i < input.count(); ++i) CHECK(out[i] == input[i]);
}

TEST_CASE("conv matches the 7-deep nested-loop oracle") {
    Rng rng(3);
    ConvSpec spec;
    spec.in_ch = 2;
    spec.out_ch = 3;
    ConvParams params;
    params.w = random_tensor(Shape{3, 2, 3, 3, 3}, rng);
    params.b = random_tensor(Shape{3}, rng);
    Tensor input = random_tensor(Shape{1, 2, 5, 5, 5}, rng);

    auto out = conv_forward(input, spec, params);

    testutil::ConvRef ref;
    ref.batch = 1;
    ref.in_ch = 2;
    ref.d = ref.h = ref.w = 5;
    ref.out_ch = 3;
    ref.kd = ref.kh = ref.kw = 3;
    ref.pad_d = ref.pad_h = ref.pad_w = 1;
    auto expect = testutil::conv_reference(ref, testutil::to_dvec(input.data(), input.count()),
                                           testutil::to_dvec(params.w.data(), params.w.count()),
                                           testutil::to_dvec(params.b.data(), params.b.count()));
    REQUIRE(out.count() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("conv output extent follows floor((in + 2p - k)/s) + 1") {
    ConvSpec spec;
    spec.kd = spec.kh = spec.kw = 3;
    spec.stride = 2;
    spec.pad_d = spec.pad_h = spec.pad_w = 1;
    auto cd = conv_output_dims(spec, 7, 8, 9);
    CHECK(cd.od == 4);
    CHECK(cd.oh == 4);
    CHECK(cd.ow == 5);

    ConvSpec too_big;
    too_big.kd = 5;
    too_big.pad_d = 0;
    CHECK_THROWS_AS(conv_output_dims(too_big, 3, 8, 8), Error);
}

TEST_CASE("conv linearity with zero bias") {
    Rng rng(4);
    ConvSpec spec;
    spec.in_ch = 1;
    spec.out_ch = 2;
    ConvParams params;
    params.w = random_tensor(Shape{2, 1, 3, 3, 3}, rng);
    params.b = Tensor(Shape{2}, 0.0f);
    Tensor x = random_tensor(Shape{1, 1, 4, 4, 4}, rng);
    Tensor y = random_tensor(Shape{1, 1, 4, 4, 4}, rng);
    const float alpha = 0.7f, beta = -1.3f;

    Tensor mix(x.shape());
    for (std::size_t i = 0; i < x.count(); ++i) mix[i] = alpha * x[i] + beta * y[i];
    auto lhs = conv_forward(mix, spec, params);
    auto cx = conv_forward(x, spec, params);
    auto cy = conv_forward(y, spec, params);
    for (std::size_t i = 0; i < lhs.count(); ++i)
        CHECK(lhs[i] == doctest::Approx(alpha * cx[i] + beta * cy[i]).epsilon(1e-4));
}

TEST_CASE("batchnorm train mode standardizes each channel") {
    Rng rng(5);
    BatchNormSpec spec;
    spec.channels = 3;
    BatchNormParams params;
    params.gamma = Tensor(Shape{3}, 1.0f);
    params.beta = Tensor(Shape{3}, 0.0f);
    params.running_mean = Tensor(Shape{3}, 0.0f);
    params.running_var = Tensor(Shape{3}, 1.0f);

    Tensor input = random_tensor(Shape{4, 3, 2, 4, 4}, rng, -3.0, 5.0);
    auto out = batchnorm_forward(input, spec, params, Mode::train);

    const std::size_t spatial = 2 * 4 * 4;
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t i = 0; i < spatial; ++i) mean += out[b * 3 * spatial + c * spatial + i];
        mean /= 4.0 * spatial;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t i = 0; i < spatial; ++i) {
                const double d = out[b * 3 * spatial + c * spatial + i] - mean;
                var += d * d;
            }
        var /= 4.0 * spatial;
        CHECK(std::abs(mean) <= 1e-5);
        CHECK(std::abs(var - 1.0) <= 1e-3);
    }

    // running stats moved toward the batch statistics
    CHECK(params.running_mean[0] != 0.0f);
    CHECK(params.running_var[0] != 1.0f);
}

TEST_CASE("batchnorm gamma=2 beta=3 maps standardized data to 2x+3") {
    BatchNormSpec spec;
    spec.channels = 1;
    spec.eps = 1e-12f;
    BatchNormParams params;
    params.gamma = Tensor(Shape{1}, 2.0f);
    params.beta = Tensor(Shape{1}, 3.0f);
    params.running_mean = Tensor(Shape{1}, 0.0f);
    params.running_var = Tensor(Shape{1}, 1.0f);

    // already zero-mean unit-variance data
    Tensor input(Shape{1, 1, 1, 1, 4}, {-1.3416407865f, -0.4472135955f, 0.4472135955f, 1.3416407865f});
    auto out = batchnorm_forward(input, spec, params, Mode::train);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(out[i] == doctest::Approx(2.0f * input[i] + 3.0f).epsilon(1e-4));
}

TEST_CASE("batchnorm eval mode equals the per-element running-stat formula") {
    Rng rng(6);
    BatchNormSpec spec;
    spec.channels = 2;
    BatchNormParams params;
    params.gamma = Tensor(Shape{2}, {1.5f, 0.5f});
    params.beta = Tensor(Shape{2}, {-1.0f, 2.0f});
    params.running_mean = Tensor(Shape{2}, {0.3f, -0.7f});
    params.running_var = Tensor(Shape{2}, {1.2f, 0.8f});

    Tensor input = random_tensor(Shape{2, 2, 1, 3, 3}, rng);
    auto out = batchnorm_forward(input, spec, params, Mode::eval);
    const std::size_t spatial = 9;
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t i = 0; i < spatial; ++i) {
                const std::size_t idx = b * 2 * spatial + c * spatial + i;
                const double expect = (input[idx] - params.running_mean[c]) /
                                          std::sqrt(params.running_var[c] + spec.eps) *
                                          params.gamma[c] +
                                      params.beta[c];
                CHECK(out[idx] == doctest::Approx(expect).epsilon(1e-5));
            }

    // train-mode with a single value per channel is rejected
    Tensor tiny(Shape{1, 2, 1, 1, 1});
    CHECK_THROWS_AS(batchnorm_forward(tiny, spec, params, Mode::train), Error);
}

TEST_CASE("maxpool: 2x2 window over [[1,2],[3,4]] gives 4; constant input takes first index") {
    Tensor input(Shape{1, 1, 1, 2, 2}, {1, 2, 3, 4});
    MaxPoolSpec spec;
    spec.kd = 1;
    spec.sd = 1;
    auto res = maxpool_forward(input, spec);
    CHECK(res.output.count() == 1);
    CHECK(res.output[0] == 4.0f);
    CHECK(res.argmax[0] == 3);

    Tensor flat(Shape{1, 1, 2, 2, 2}, 5.0f);
    MaxPoolSpec cube;  // 2x2x2
    auto tie = maxpool_forward(flat, cube);
    CHECK(tie.output[0] == 5.0f);
    CHECK(tie.argmax[0] == 0);  // lowest flat index wins the tie

    MaxPoolSpec big;
    big.kd = 4;
    CHECK_THROWS_AS(maxpool_forward(flat, big), Error);
}

TEST_CASE("maxpool matches the per-window scan oracle and drops partial windows") {
    Rng rng(7);
    Tensor input = random_tensor(Shape{1, 1, 5, 5, 5}, rng);
    MaxPoolSpec spec;  // 2^3, stride 2: floor semantics drop the trailing plane
    auto res = maxpool_forward(input, spec);
    CHECK(res.output.shape() == Shape{1, 1, 2, 2, 2});

    testutil::PoolRef ref;
    ref.d = ref.h = ref.w = 5;
    auto expect = testutil::maxpool_reference(ref, testutil::to_dvec(input.data(), input.count()));
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(res.output[i] == doctest::Approx(expect[i]));

    // argmax routes backward gradient to the recorded indices only
    Tensor dout(res.output.shape(), 1.0f);
    auto dx = maxpool_backward(input.shape(), dout, res.argmax);
    double total = 0.0;
    for (std::size_t i = 0; i < dx.count(); ++i) {
        total += dx[i];
        if (dx[i] != 0.0f) CHECK(dx[i] == 1.0f);
    }
    CHECK(total == doctest::Approx(8.0));
}

TEST_CASE("fc forward matches reference; softmax rows sum to 1") {
    Rng rng(8);
    FcSpec spec{6, 4};
    FcParams params;
    params.w = random_tensor(Shape{4, 6}, rng);
    params.b = random_tensor(Shape{4}, rng);
    Tensor x = random_tensor(Shape{3, 6}, rng);
    auto out = fc_forward(x, spec, params);
    auto expect = testutil::fc_reference(3, 6, 4, testutil::to_dvec(x.data(), x.count()),
                                         testutil::to_dvec(params.w.data(), params.w.count()),
                                         testutil::to_dvec(params.b.data(), params.b.count()));
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-5));

    auto probs = softmax_forward(out);
    for (std::size_t b = 0; b < 3; ++b) {
        double row = 0.0;
        for (std::size_t c = 0; c < 4; ++c) row += probs[b * 4 + c];
        CHECK(std::abs(row - 1.0) <= 1e-6);
    }
}

TEST_CASE("softmax of logits (2, 0) is (0.8808, 0.1192)") {
    Tensor logits(Shape{1, 2}, {2.0f, 0.0f});
    auto probs = softmax_forward(logits);
    CHECK(probs[0] == doctest::Approx(0.8808).epsilon(1e-3));
    CHECK(probs[1] == doctest::Approx(0.1192).epsilon(1e-3));
}

TEST_CASE("cross entropy at uniform predictions is ln 2; p-y gradient at zero logits") {
    Tensor logits(Shape{2, 2}, 0.0f);
    auto probs = softmax_forward(logits);
    CHECK(probs[0] == 0.5f);  // exact: equal logits
    const double loss = cross_entropy(probs, {0, 1});
    CHECK(std::abs(loss - std::log(2.0)) <= 1e-6);

    Tensor one(Shape{1, 2}, 0.0f);
    auto p1 = softmax_forward(one);
    auto d = softmax_ce_backward(p1, {0});
    CHECK(d[0] == doctest::Approx(-0.5));
    CHECK(d[1] == doctest::Approx(0.5));
    CHECK(cross_entropy(p1, {0}) >= 0.0);
}
