#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "voxbag/rng.hpp"
#include "voxbag/tensor.hpp"

using namespace voxbag;

TEST_CASE("shape invariants") {
    Shape s{2, 3, 4};
    CHECK(s.rank() == 3);
    CHECK(s.count() == 24);
    CHECK_THROWS_AS(Shape({1, 2, 3, 4, 5, 6}), Error);  // rank > 5
    CHECK_THROWS_AS(Shape({0, 2}), Error);              // extent < 1
}

TEST_CASE("elementwise ops") {
    Tensor a(Shape{2}, {1, 2});
    Tensor b(Shape{2}, {3, 4});
    auto c = add(a, b);
    CHECK(c[0] == 4.0f);
    CHECK(c[1] == 6.0f);

    auto z = scale(Tensor(Shape{3}, {1, 2, 3}), 0.0f);
    CHECK(z[0] == 0.0f);
    CHECK(z[1] == 0.0f);
    CHECK(z[2] == 0.0f);

    auto r = relu_map(Tensor(Shape{3}, {-1.5f, 0.0f, 2.5f}));
    CHECK(r[0] == 0.0f);
    CHECK(r[1] == 0.0f);
    CHECK(r[2] == 2.5f);

    CHECK_THROWS_AS(add(a, Tensor(Shape{3})), Error);
    // both shapes reported
    try {
        add(a, Tensor(Shape{3}));
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("[2]") != std::string::npos);
        CHECK(msg.find("[3]") != std::string::npos);
    }
}

TEST_CASE("elementwise ops are pointwise (random index probes)") {
    Rng rng(11);
    Tensor a(Shape{4, 5});
    Tensor b(Shape{4, 5});
    for (std::size_t i = 0; i < a.count(); ++i) {
        a[i] = static_cast<float>(rng.uniform(-2, 2));
        b[i] = static_cast<float>(rng.uniform(-2, 2));
    }
    auto s = mul(a, b);
    for (int probe = 0; probe < 10; ++probe) {
        const std::size_t i = rng.next_below(a.count());
        CHECK(s[i] == a[i] * b[i]);
    }
}

TEST_CASE("matmul identity and small products") {
    Tensor eye(Shape{2, 2}, {1, 0, 0, 1});
    Tensor m(Shape{2, 2}, {1, 2, 3, 4});
    auto left = matmul(eye, m);
    auto right = matmul(m, eye);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(left[i] == m[i]);   // bit-exact
        CHECK(right[i] == m[i]);
    }

    Tensor r(Shape{1, 2}, {1, 2});
    Tensor c(Shape{2, 1}, {3, 4});
    CHECK(matmul(r, c)[0] == 11.0f);

    CHECK_THROWS_AS(matmul(r, r), Error);
}

TEST_CASE("matmul equals triple-loop oracle") {
    Rng rng(42);
    Tensor a(Shape{4, 5});
    Tensor b(Shape{5, 3});
    for (std::size_t i = 0; i < a.count(); ++i) a[i] = static_cast<float>(rng.uniform(-1, 1));
    for (std::size_t i = 0; i < b.count(); ++i) b[i] = static_cast<float>(rng.uniform(-1, 1));
    auto c = matmul(a, b);
    // independently hand-summed triple loop, same k-ascending accumulation
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            float acc = 0.0f;
            for (std::size_t k = 0; k < 5; ++k) acc += a[i * 5 + k] * b[k * 3 + j];
            CHECK(c[i * 3 + j] == acc);  // bit-exact: identical accumulation order
        }
    }
}

TEST_CASE("reductions") {
    Tensor v(Shape{3}, {2, 4, 6});
    CHECK(reduce_all(v, Reduce::mean) == 4.0f);
    CHECK(reduce_all(Tensor(Shape{3}, {1, 1, 1}), Reduce::var) == 0.0f);
    CHECK(reduce_all(v, Reduce::max) == 6.0f);
    CHECK(reduce_all(v, Reduce::sum) == 12.0f);

    CHECK_THROWS_AS(reduce(v, {}, Reduce::mean), Error);
    CHECK(reduce(v, {}, Reduce::sum)[1] == 4.0f);  // empty axes: no-op sum
    CHECK_THROWS_AS(reduce(v, {3}, Reduce::sum), Error);

    // axis reduction keeps the remaining axes
    Tensor m(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    auto col_sum = reduce(m, {0}, Reduce::sum);
    CHECK(col_sum.shape() == Shape{3});
    CHECK(col_sum[0] == 5.0f);
    CHECK(col_sum[1] == 7.0f);
    CHECK(col_sum[2] == 9.0f);
    auto row_mean = reduce(m, {1}, Reduce::mean);
    CHECK(row_mean.shape() == Shape{2});
    CHECK(row_mean[0] == 2.0f);
    CHECK(row_mean[1] == 5.0f);
}

TEST_CASE("variance matches two-pass oracle on 1000 synthetic samples") {
    // known synthetic sequence
    Rng rng(7);
    Tensor t(Shape{1000});
    for (std::size_t i = 0; i < t.count(); ++i)
        t[i] = static_cast<float>(3.0 + 2.0 * rng.normal());
    const float var = reduce_all(t, Reduce::var);

    // independent two-pass reference in double
    double mean = 0.0;
    for (std::size_t i = 0; i < t.count(); ++i) mean += t[i];
    mean /= 1000.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < t.count(); ++i) acc += (t[i] - mean) * (t[i] - mean);
    const double ref = acc / 1000.0;
    CHECK(std::abs(var - ref) / ref <= 1e-6);
}

TEST_CASE("mean after subtracting the mean is near zero") {
    Rng rng(3);
    Tensor t(Shape{4, 4, 4});
    for (std::size_t i = 0; i < t.count(); ++i)
        t[i] = static_cast<float>(rng.uniform(-100, 100));
    const float mean = reduce_all(t, Reduce::mean);
    const auto centered = add_scalar(t, -mean);
    CHECK(std::abs(reduce_all(centered, Reduce::mean)) <= 1e-5f);
}

TEST_CASE("reshape keeps flat row-major order and round-trips bit-exactly") {
    Tensor m(Shape{2, 3}, {1, 2, 3, 4, 5, 6});
    auto r = reshape(m, Shape{3, 2});
    for (std::size_t i = 0; i < 6; ++i) CHECK(r[i] == m[i]);
    auto back = reshape(r, Shape{2, 3});
    for (std::size_t i = 0; i < 6; ++i) CHECK(back[i] == m[i]);
    CHECK_THROWS_AS(reshape(m, Shape{4, 2}), Error);
}

TEST_CASE("pad_zero places the block at the stated offset") {
    Tensor v(Shape{5}, {7, 7, 7, 7, 7});
    auto p = pad_zero(v, {{1, 1}});
    CHECK(p.shape() == Shape{7});
    CHECK(p[0] == 0.0f);
    for (std::size_t i = 1; i <= 5; ++i) CHECK(p[i] == 7.0f);
    CHECK(p[6] == 0.0f);
}

TEST_CASE("slice then pad round-trip equals masked original") {
    Rng rng(5);
    Tensor t(Shape{4, 6});
    for (std::size_t i = 0; i < t.count(); ++i) t[i] = static_cast<float>(rng.uniform(-1, 1));
    auto s = slice_region(t, {1, 2}, {2, 3});
    auto restored = pad_zero(s, {{1, 1}, {2, 1}});
    CHECK(restored.shape() == t.shape());
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 6; ++c) {
            const bool inside = r >= 1 && r < 3 && c >= 2 && c < 5;
            const float expect = inside ? t[r * 6 + c] : 0.0f;
            CHECK(restored[r * 6 + c] == expect);  // index-by-index
        }
    }
    CHECK_THROWS_AS(slice_region(t, {3, 0}, {2, 6}), Error);
}
