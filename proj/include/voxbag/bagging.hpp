#ifndef VOXBAG_BAGGING_HPP_
#define VOXBAG_BAGGING_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "voxbag/error.hpp"
#include "voxbag/rng.hpp"
#include "voxbag/tree.hpp"

namespace voxbag {

/// Bootstrap-aggregation settings. Voting is always soft: the ensemble
/// probability is the unweighted mean of the tree posteriors.
struct BaggingConfig {
    std::size_t n_bags = 50;
    TreeConfig tree;
    std::uint64_t seed = 0;
};

struct BaggingModel {
    std::vector<DecisionTree> trees;
    std::vector<std::vector<std::uint32_t>> bag_indices;  // per tree, length n_train
    int class_count = 2;

    bool fitted() const { return !trees.empty(); }
};

/// n uniform draws with replacement from [0, n).
inline std::vector<std::uint32_t> bootstrap_sample(std::size_t n, Rng& rng) {
    if (n < 1) throw Error(Errc::config, "bootstrap_sample: n must be >= 1");
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(rng.next_below(n));
    return idx;
}

/// Fits B trees, tree i on bootstrap bag i. Every bag's rng stream derives
/// from the master seed by index, so the model is identical no matter the
/// order (or parallelism) the bags are fit in.
inline BaggingModel fit_bagging(const Tensor& X, const std::vector<int>& y,
                                const BaggingConfig& config) {
    if (X.rank() != 2) throw Error(Errc::config, "fit_bagging: X must be rank 2");
    const std::size_t n = X.extent(0);
    if (n < 2 || y.size() != n) throw Error(Errc::config, "fit_bagging: need >= 2 samples with labels");
    bool has0 = false, has1 = false;
    for (int l : y) (l == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw Error(Errc::data, "fit_bagging: both classes must be present");
    if (config.n_bags < 1) throw Error(Errc::config, "fit_bagging: n_bags must be >= 1");

    const Rng master(config.seed);
    BaggingModel model;
    model.trees.resize(config.n_bags);
    model.bag_indices.resize(config.n_bags);
    for (std::size_t b = 0; b < config.n_bags; ++b) {
        Rng bag_rng = master.derive(b);
        std::vector<std::uint32_t> bag = bootstrap_sample(n, bag_rng);
        std::vector<std::uint32_t> mult(n, 0);
        for (std::uint32_t i : bag) ++mult[i];
        model.bag_indices[b] = std::move(bag);
        model.trees[b] = fit_tree(X, y, mult, config.tree, &bag_rng);
    }
    return model;
}

/// Soft vote: unweighted mean of the tree posteriors.
inline std::array<double, 2> predict_proba(const BaggingModel& model, std::span<const float> x) {
    if (!model.fitted()) throw Error(Errc::config, "predict_proba: unfitted model");
    std::array<double, 2> acc{0.0, 0.0};
    for (const auto& tree : model.trees) {
        const auto p = tree_predict_proba(tree, x);
        acc[0] += p[0];
        acc[1] += p[1];
    }
    const double inv = 1.0 / static_cast<double>(model.trees.size());
    return {acc[0] * inv, acc[1] * inv};
}

/// Argmax of predict_proba; an exact tie goes to class 0 (CN).
inline int predict(const BaggingModel& model, std::span<const float> x) {
    const auto p = predict_proba(model, x);
    return p[1] > p[0] ? 1 : 0;
}

}  // namespace voxbag

#endif  // VOXBAG_BAGGING_HPP_
