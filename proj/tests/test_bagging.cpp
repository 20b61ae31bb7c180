#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "voxbag/bagging.hpp"
#include "voxbag/rng.hpp"

using namespace voxbag;

namespace {

// two separable 2-D blobs, one per class
void separable_blobs(std::size_t n_per_class, std::uint64_t seed, Tensor& X, std::vector<int>& y) {
    Rng rng(seed);
    X = Tensor(Shape{2 * n_per_class, 2});
    y.assign(2 * n_per_class, 0);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const int cls = i < n_per_class ? 0 : 1;
        y[i] = cls;
        const double cx = cls == 0 ? -2.0 : 2.0;
        X[i * 2 + 0] = static_cast<float>(cx + rng.normal() * 0.6);
        X[i * 2 + 1] = static_cast<float>(rng.normal() * 0.6);
    }
}

}  // namespace

TEST_CASE("bootstrap_sample basics") {
    Rng rng(4);
    auto one = bootstrap_sample(1, rng);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == 0);

    auto bag = bootstrap_sample(200, rng);
    CHECK(bag.size() == 200);
    for (auto i : bag) CHECK(i < 200);
}

TEST_CASE("mean unique-index fraction matches the closed form over 10000 bags") {
    const std::size_t n = 200;
    const double expect = 1.0 - std::pow(1.0 - 1.0 / static_cast<double>(n), static_cast<double>(n));
    Rng master(2024);
    double acc = 0.0;
    for (int b = 0; b < 10000; ++b) {
        Rng rng = master.derive(static_cast<std::uint64_t>(b));
        auto bag = bootstrap_sample(n, rng);
        std::set<std::uint32_t> uniq(bag.begin(), bag.end());
        acc += static_cast<double>(uniq.size()) / static_cast<double>(n);
    }
    const double mean_frac = acc / 10000.0;
    CHECK(std::abs(mean_frac - expect) <= 0.005);
}

TEST_CASE("B=1 equals a single tree on one bootstrap bag") {
    Tensor X;
    std::vector<int> y;
    separable_blobs(30, 7, X, y);

    BaggingConfig cfg;
    cfg.n_bags = 1;
    cfg.seed = 99;
    auto model = fit_bagging(X, y, cfg);
    REQUIRE(model.trees.size() == 1);
    REQUIRE(model.bag_indices.size() == 1);
    CHECK(model.bag_indices[0].size() == X.extent(0));

    // refit the same bag by hand
    Rng bag_rng = Rng(cfg.seed).derive(0);
    auto bag = bootstrap_sample(X.extent(0), bag_rng);
    std::vector<std::uint32_t> mult(X.extent(0), 0);
    for (auto i : bag) ++mult[i];
    auto tree = fit_tree(X, y, mult, cfg.tree, &bag_rng);
    REQUIRE(tree.nodes.size() == model.trees[0].nodes.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        CHECK(tree.nodes[i].feature == model.trees[0].nodes[i].feature);
        CHECK(tree.nodes[i].threshold == model.trees[0].nodes[i].threshold);
    }
}

TEST_CASE("same seed gives identical models; bags differ across indices") {
    Tensor X;
    std::vector<int> y;
    separable_blobs(25, 3, X, y);
    BaggingConfig cfg;
    cfg.n_bags = 8;
    cfg.seed = 5;
    auto a = fit_bagging(X, y, cfg);
    auto b = fit_bagging(X, y, cfg);
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        REQUIRE(a.bag_indices[t] == b.bag_indices[t]);
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
            CHECK(a.trees[t].nodes[i].feature == b.trees[t].nodes[i].feature);
            CHECK(a.trees[t].nodes[i].threshold == b.trees[t].nodes[i].threshold);
        }
    }
    CHECK(a.bag_indices[0] != a.bag_indices[1]);
}

TEST_CASE("soft voting is the arithmetic mean of tree posteriors") {
    Tensor X;
    std::vector<int> y;
    separable_blobs(20, 11, X, y);
    BaggingConfig cfg;
    cfg.n_bags = 7;
    cfg.seed = 2;
    auto model = fit_bagging(X, y, cfg);

    Rng rng(12);
    for (int probe = 0; probe < 100; ++probe) {
        const float q[2] = {static_cast<float>(rng.uniform(-4, 4)),
                            static_cast<float>(rng.uniform(-4, 4))};
        auto p = predict_proba(model, q);
        double m0 = 0, m1 = 0;
        for (const auto& tree : model.trees) {
            auto tp = tree_predict_proba(tree, q);
            m0 += tp[0];
            m1 += tp[1];
        }
        m0 /= static_cast<double>(model.trees.size());
        m1 /= static_cast<double>(model.trees.size());
        CHECK(std::abs(p[0] - m0) <= 1e-9);
        CHECK(std::abs(p[1] - m1) <= 1e-9);
        CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
    }
}

TEST_CASE("prediction is invariant under tree permutation") {
    Tensor X;
    std::vector<int> y;
    separable_blobs(20, 13, X, y);
    BaggingConfig cfg;
    cfg.n_bags = 9;
    cfg.seed = 31;
    auto model = fit_bagging(X, y, cfg);

    BaggingModel shuffled = model;
    std::reverse(shuffled.trees.begin(), shuffled.trees.end());
    Rng rng(14);
    for (int probe = 0; probe < 100; ++probe) {
        const float q[2] = {static_cast<float>(rng.uniform(-4, 4)),
                            static_cast<float>(rng.uniform(-4, 4))};
        CHECK(predict(model, q) == predict(shuffled, q));
        auto a = predict_proba(model, q);
        auto b = predict_proba(shuffled, q);
        CHECK(std::abs(a[1] - b[1]) <= 1e-12);
    }
}

TEST_CASE("mean probability 0.5 predicts class 0 (tie rule)") {
    // two single-leaf trees with mirrored posteriors
    DecisionTree t1, t2;
    t1.n_features = t2.n_features = 1;
    TreeNode leaf;
    leaf.posterior = {0.25, 0.75};
    leaf.class_counts = {1, 3};
    t1.nodes.push_back(leaf);
    leaf.posterior = {0.75, 0.25};
    leaf.class_counts = {3, 1};
    t2.nodes.push_back(leaf);
    BaggingModel model;
    model.trees = {t1, t2};
    const float q[1] = {0.0f};
    auto p = predict_proba(model, q);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(predict(model, q) == 0);
}

TEST_CASE("held-out accuracy >= 0.95 on separable 2-D data (200 points)") {
    Tensor X_train, X_test;
    std::vector<int> y_train, y_test;
    separable_blobs(100, 17, X_train, y_train);  // 200 training points
    separable_blobs(40, 18, X_test, y_test);

    BaggingConfig cfg;
    cfg.n_bags = 50;
    cfg.seed = 9;
    auto model = fit_bagging(X_train, y_train, cfg);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y_test.size(); ++i) {
        if (predict(model, std::span<const float>(X_test.data() + i * 2, 2)) == y_test[i]) ++hits;
    }
    CHECK(static_cast<double>(hits) / static_cast<double>(y_test.size()) >= 0.95);
}

TEST_CASE("single-class input is rejected") {
    Tensor X(Shape{4, 2}, std::vector<float>(8, 1.0f));
    CHECK_THROWS_AS(fit_bagging(X, {1, 1, 1, 1}, BaggingConfig{}), Error);
    BaggingModel empty;
    const float q[2] = {0, 0};
    CHECK_THROWS_AS(predict_proba(empty, q), Error);
}
