#ifndef VOXBAG_TREE_HPP_
#define VOXBAG_TREE_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "voxbag/error.hpp"
#include "voxbag/rng.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

struct TreeConfig {
    std::size_t max_depth = 10;
    std::size_t min_samples_split = 2;   // weighted sample count
    double min_impurity_decrease = 0.0;
    std::size_t m_try = 0;               // features considered per split; 0 = all
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    std::array<double, 2> class_counts{0.0, 0.0};
    std::array<double, 2> posterior{0.0, 0.0};

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t n_features = 0;
    TreeConfig config;
};

namespace detail {

inline double gini(double c0, double c1, double n) {
    const double p0 = c0 / n;
    const double p1 = c1 / n;
    return 1.0 - (p0 * p0 + p1 * p1);
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double decrease = 0.0;
};

/// Greedy best split over the candidate features: thresholds are midpoints
/// between consecutive distinct sorted values. Features and thresholds are
/// scanned ascending and replacement requires a strictly larger decrease,
/// so ties resolve to the lowest feature index, then the lowest threshold.
inline SplitChoice best_split(const Tensor& X, const std::vector<int>& y,
                              const std::vector<std::uint32_t>& mult,
                              const std::vector<std::size_t>& samples,
                              const std::vector<std::size_t>& features,
                              const std::array<double, 2>& counts, double n) {
    SplitChoice best;
    const double parent = gini(counts[0], counts[1], n);
    const std::size_t d = X.extent(1);

    std::vector<std::pair<float, std::size_t>> vals;
    vals.reserve(samples.size());
    for (std::size_t f : features) {
        vals.clear();
        for (std::size_t s : samples) vals.emplace_back(X[s * d + f], s);
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double left0 = 0.0, left1 = 0.0, nl = 0.0;
        std::size_t i = 0;
        while (i < vals.size()) {
            const float v = vals[i].first;
            while (i < vals.size() && vals[i].first == v) {
                const std::size_t s = vals[i].second;
                const double w = mult[s];
                (y[s] == 0 ? left0 : left1) += w;
                nl += w;
                ++i;
            }
            if (i == vals.size()) break;  // no boundary after the last group
            const double nr = n - nl;
            const double decrease =
                parent - (nl * gini(left0, left1, nl) + nr * gini(counts[0] - left0, counts[1] - left1, nr)) / n;
            if (decrease > best.decrease) {
                best.feature = static_cast<int>(f);
                best.threshold = (static_cast<double>(v) + static_cast<double>(vals[i].first)) / 2.0;
                best.decrease = decrease;
            }
        }
    }
    return best;
}

inline int grow_tree(DecisionTree& tree, const Tensor& X, const std::vector<int>& y,
                     const std::vector<std::uint32_t>& mult, std::vector<std::size_t> samples,
                     std::size_t depth, Rng* rng) {
    std::array<double, 2> counts{0.0, 0.0};
    for (std::size_t s : samples) counts[y[s]] += mult[s];
    const double n = counts[0] + counts[1];

    auto make_leaf = [&]() {
        TreeNode leaf;
        leaf.class_counts = counts;
        leaf.posterior = {counts[0] / n, counts[1] / n};
        tree.nodes.push_back(leaf);
        return static_cast<int>(tree.nodes.size() - 1);
    };

    const TreeConfig& cfg = tree.config;
    const bool pure = counts[0] == 0.0 || counts[1] == 0.0;
    if (pure || depth >= cfg.max_depth || n < static_cast<double>(cfg.min_samples_split))
        return make_leaf();

    const std::size_t d = X.extent(1);
    std::vector<std::size_t> features;
    if (cfg.m_try == 0 || cfg.m_try >= d) {
        features.resize(d);
        for (std::size_t f = 0; f < d; ++f) features[f] = f;
    } else {
        if (rng == nullptr)
            throw Error(Errc::config, "fit_tree: m_try < feature count requires an rng");
        std::vector<std::size_t> pool(d);
        for (std::size_t f = 0; f < d; ++f) pool[f] = f;
        for (std::size_t i = 0; i < cfg.m_try; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng->next_below(d - i));
            std::swap(pool[i], pool[j]);
        }
        features.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.m_try));
        std::sort(features.begin(), features.end());
    }

    const SplitChoice split = best_split(X, y, mult, samples, features, counts, n);
    if (split.feature < 0 || split.decrease <= 0.0 || split.decrease < cfg.min_impurity_decrease)
        return make_leaf();

    std::vector<std::size_t> left_samples, right_samples;
    for (std::size_t s : samples) {
        if (static_cast<double>(X[s * d + static_cast<std::size_t>(split.feature)]) <= split.threshold)
            left_samples.push_back(s);
        else
            right_samples.push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();

    TreeNode node;
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.class_counts = counts;
    tree.nodes.push_back(node);
    const int self = static_cast<int>(tree.nodes.size() - 1);
    // children after the parent; rng is consumed left-to-right, deterministically
    const int left = grow_tree(tree, X, y, mult, std::move(left_samples), depth + 1, rng);
    const int right = grow_tree(tree, X, y, mult, std::move(right_samples), depth + 1, rng);
    tree.nodes[self].left = left;
    tree.nodes[self].right = right;
    return self;
}

}  // namespace detail

/// CART fit with Gini impurity. `multiplicity` carries bootstrap repeat
/// counts (zero excludes a sample); pass an rng only when m_try subsamples
/// features.
inline DecisionTree fit_tree(const Tensor& X, const std::vector<int>& y,
                             const std::vector<std::uint32_t>& multiplicity, const TreeConfig& config,
                             Rng* rng = nullptr) {
    if (X.rank() != 2) throw Error(Errc::config, "fit_tree: X must be rank 2 [n x d]");
    const std::size_t n = X.extent(0);
    if (y.size() != n || multiplicity.size() != n)
        throw Error(Errc::config, "fit_tree: X, y, multiplicity sizes disagree");
    if (!all_finite(X)) throw Error(Errc::numeric, "fit_tree: non-finite feature value");

    std::vector<std::size_t> samples;
    for (std::size_t s = 0; s < n; ++s) {
        if (y[s] != 0 && y[s] != 1) throw Error(Errc::config, "fit_tree: labels must be 0 or 1");
        if (multiplicity[s] > 0) samples.push_back(s);
    }
    if (samples.empty()) throw Error(Errc::data, "fit_tree: no samples with positive multiplicity");

    DecisionTree tree;
    tree.n_features = X.extent(1);
    tree.config = config;
    detail::grow_tree(tree, X, y, multiplicity, std::move(samples), 0, rng);
    return tree;
}

inline DecisionTree fit_tree(const Tensor& X, const std::vector<int>& y, const TreeConfig& config,
                             Rng* rng = nullptr) {
    return fit_tree(X, y, std::vector<std::uint32_t>(X.extent(0), 1), config, rng);
}

/// Routes by x[feature] <= threshold -> left; returns the leaf posterior.
inline std::array<double, 2> tree_predict_proba(const DecisionTree& tree, std::span<const float> x) {
    if (x.size() != tree.n_features)
        throw Error(Errc::config, "tree_predict_proba: feature width mismatch");
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf()) {
        const std::size_t f = static_cast<std::size_t>(node->feature);
        node = &tree.nodes[static_cast<double>(x[f]) <= node->threshold
                               ? static_cast<std::size_t>(node->left)
                               : static_cast<std::size_t>(node->right)];
    }
    return node->posterior;
}

inline std::size_t tree_depth(const DecisionTree& tree, int node = 0) {
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(node)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(tree_depth(tree, n.left), tree_depth(tree, n.right));
}

}  // namespace voxbag

#endif  // VOXBAG_TREE_HPP_
