#ifndef VOXBAG_CNN_NETWORK_HPP_
#define VOXBAG_CNN_NETWORK_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "voxbag/cnn/layers.hpp"
#include "voxbag/error.hpp"
#include "voxbag/rng.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

enum class DimsMode { three_d, two_d };

inline const char* dims_mode_name(DimsMode m) { return m == DimsMode::three_d ? "3d" : "2d"; }

/// Layered network description. Layer shapes must chain from input_shape
/// (channels, depth, height, width) to a 2-logit softmax output.
struct NetworkSpec {
    std::array<std::size_t, 4> input_shape{1, 32, 32, 32};
    std::vector<LayerSpec> layers;
    int preset_id = 0;  // 0 = custom
    DimsMode mode = DimsMode::three_d;
};

namespace detail {

struct ShapeCursor {
    bool flat = false;
    std::size_t ch, d, h, w;   // meaningful while !flat
    std::size_t features = 0;  // meaningful when flat
};

}  // namespace detail

/// Walks the layer chain and verifies every shape transition; returns the
/// class count of the final softmax.
inline std::size_t validate_network(const NetworkSpec& net) {
    detail::ShapeCursor cur{false, net.input_shape[0], net.input_shape[1], net.input_shape[2],
                            net.input_shape[3], 0};
    bool softmax_seen = false;
    std::size_t classes = 0;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (softmax_seen) throw Error(Errc::config, "network: softmax must be the last layer");
        const LayerSpec& layer = net.layers[li];
        if (std::holds_alternative<ConvSpec>(layer)) {
            const auto& s = std::get<ConvSpec>(layer);
            if (cur.flat || cur.ch != s.in_ch)
                throw Error(Errc::config, "network: conv layer " + std::to_string(li) + " expects " +
                                              std::to_string(s.in_ch) + " channels");
            const ConvDims cd = conv_output_dims(s, cur.d, cur.h, cur.w);
            cur.ch = s.out_ch;
            cur.d = cd.od;
            cur.h = cd.oh;
            cur.w = cd.ow;
        } else if (std::holds_alternative<BatchNormSpec>(layer)) {
            if (cur.flat || cur.ch != std::get<BatchNormSpec>(layer).channels)
                throw Error(Errc::config, "network: batchnorm channel mismatch at layer " +
                                              std::to_string(li));
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            // shape preserved
        } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
            const auto& s = std::get<MaxPoolSpec>(layer);
            if (cur.flat) throw Error(Errc::config, "network: pool after flatten");
            if (s.kd > cur.d || s.kh > cur.h || s.kw > cur.w)
                throw Error(Errc::config, "network: input too small for the pool chain at layer " +
                                              std::to_string(li));
            cur.d = (cur.d - s.kd) / s.sd + 1;
            cur.h = (cur.h - s.kh) / s.sh + 1;
            cur.w = (cur.w - s.kw) / s.sw + 1;
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            if (cur.flat) throw Error(Errc::config, "network: repeated flatten");
            cur.features = cur.ch * cur.d * cur.h * cur.w;
            cur.flat = true;
        } else if (std::holds_alternative<FcSpec>(layer)) {
            const auto& s = std::get<FcSpec>(layer);
            if (!cur.flat || cur.features != s.in_dim)
                throw Error(Errc::config, "network: fc layer " + std::to_string(li) + " expects " +
                                              std::to_string(s.in_dim) + " inputs");
            cur.features = s.out_dim;
        } else {
            const auto& s = std::get<SoftmaxSpec>(layer);
            if (!cur.flat || cur.features != s.classes)
                throw Error(Errc::config, "network: softmax expects " + std::to_string(s.classes) +
                                              " logits");
            softmax_seen = true;
            classes = s.classes;
        }
    }
    if (!softmax_seen) throw Error(Errc::config, "network: missing softmax output layer");
    return classes;
}

/// Index of the feature layer: the ReLU directly after the first FC.
/// Its activations are the feature vector handed to the ensemble.
inline std::size_t feature_layer_index(const NetworkSpec& net) {
    for (std::size_t li = 0; li + 1 < net.layers.size(); ++li) {
        if (std::holds_alternative<FcSpec>(net.layers[li])) {
            if (!std::holds_alternative<ReluSpec>(net.layers[li + 1]))
                throw Error(Errc::config, "network: first fc layer must be followed by relu");
            return li + 1;
        }
    }
    throw Error(Errc::config, "network: no fully connected feature layer");
}

inline std::size_t feature_width(const NetworkSpec& net) {
    for (const auto& layer : net.layers)
        if (std::holds_alternative<FcSpec>(layer)) return std::get<FcSpec>(layer).out_dim;
    throw Error(Errc::config, "network: no fully connected feature layer");
}

/// Preset k has {5,4,3,6,2}[k-1] conv blocks
/// (Conv 3x3x3 pad 1 -> BatchNorm -> ReLU -> MaxPool 2^3), filter widths
/// doubling from 8, then Flatten -> FC(128) -> ReLU -> FC(2) -> Softmax.
/// 2D mode uses depth-1 kernels and pools throughout.
inline NetworkSpec network_preset(int id, DimsMode mode,
                                  const std::array<std::size_t, 4>& input_shape) {
    if (id < 1 || id > 5) throw Error(Errc::config, "network_preset: id must be in 1..5");
    static constexpr std::size_t kBlocks[5] = {5, 4, 3, 6, 2};
    static constexpr std::size_t kWidths[6] = {8, 16, 32, 64, 128, 256};
    const std::size_t blocks = kBlocks[id - 1];
    const bool two_d = mode == DimsMode::two_d;

    NetworkSpec net;
    net.input_shape = input_shape;
    net.preset_id = id;
    net.mode = mode;

    std::size_t in_ch = input_shape[0];
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        ConvSpec conv;
        conv.in_ch = in_ch;
        conv.out_ch = kWidths[blk];
        conv.kd = two_d ? 1 : 3;
        conv.kh = conv.kw = 3;
        conv.stride = 1;
        conv.pad_d = two_d ? 0 : 1;
        conv.pad_h = conv.pad_w = 1;
        net.layers.emplace_back(conv);
        net.layers.emplace_back(BatchNormSpec{conv.out_ch});
        net.layers.emplace_back(ReluSpec{});
        MaxPoolSpec pool;
        pool.kd = two_d ? 1 : 2;
        pool.kh = pool.kw = 2;
        pool.sd = two_d ? 1 : 2;
        pool.sh = pool.sw = 2;
        net.layers.emplace_back(pool);
        in_ch = conv.out_ch;
    }

    // flattened width from the validated chain so far
    std::size_t d = input_shape[1], h = input_shape[2], w = input_shape[3];
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        if (!two_d) {
            if (d < 2) throw Error(Errc::config, "network_preset: input too small for the pool chain");
            d /= 2;
        }
        if (h < 2 || w < 2)
            throw Error(Errc::config, "network_preset: input too small for the pool chain");
        h /= 2;
        w /= 2;
    }
    const std::size_t flat = in_ch * d * h * w;
    net.layers.emplace_back(FlattenSpec{});
    net.layers.emplace_back(FcSpec{flat, 128});
    net.layers.emplace_back(ReluSpec{});
    net.layers.emplace_back(FcSpec{128, 2});
    net.layers.emplace_back(SoftmaxSpec{2});

    validate_network(net);
    return net;
}

/// He-normal conv/fc weights (std = sqrt(2 / fan_in)), zero biases, unit
/// gamma / zero beta, running stats at (0, 1). Each layer draws from its
/// own derived stream.
inline Parameters init_parameters(const NetworkSpec& net, std::uint64_t seed) {
    validate_network(net);
    const Rng master(seed);
    Parameters params;
    params.layers.resize(net.layers.size());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerSpec& layer = net.layers[li];
        Rng rng = master.derive(li);
        if (std::holds_alternative<ConvSpec>(layer)) {
            const auto& s = std::get<ConvSpec>(layer);
            ConvParams p;
            p.w = Tensor(Shape{s.out_ch, s.in_ch, s.kd, s.kh, s.kw});
            p.b = Tensor(Shape{s.out_ch});
            const double std_dev = std::sqrt(2.0 / static_cast<double>(s.in_ch * s.kd * s.kh * s.kw));
            for (std::size_t i = 0; i < p.w.count(); ++i)
                p.w[i] = static_cast<float>(rng.normal() * std_dev);
            params.layers[li] = std::move(p);
        } else if (std::holds_alternative<BatchNormSpec>(layer)) {
            const auto& s = std::get<BatchNormSpec>(layer);
            BatchNormParams p;
            p.gamma = Tensor(Shape{s.channels}, 1.0f);
            p.beta = Tensor(Shape{s.channels}, 0.0f);
            p.running_mean = Tensor(Shape{s.channels}, 0.0f);
            p.running_var = Tensor(Shape{s.channels}, 1.0f);
            params.layers[li] = std::move(p);
        } else if (std::holds_alternative<FcSpec>(layer)) {
            const auto& s = std::get<FcSpec>(layer);
            FcParams p;
            p.w = Tensor(Shape{s.out_dim, s.in_dim});
            p.b = Tensor(Shape{s.out_dim});
            const double std_dev = std::sqrt(2.0 / static_cast<double>(s.in_dim));
            for (std::size_t i = 0; i < p.w.count(); ++i)
                p.w[i] = static_cast<float>(rng.normal() * std_dev);
            params.layers[li] = std::move(p);
        }
    }
    return params;
}

/// Train-mode forward keeps everything backward() needs; eval mode keeps
/// only the outputs (plus the requested feature activations).
struct ForwardResult {
    Tensor logits;  // input to the softmax layer
    Tensor probs;
    std::vector<Tensor> activations;                    // activations[i] feeds layer i (train mode)
    std::vector<BatchNormCache> bn_cache;               // per layer slot
    std::vector<std::vector<std::uint32_t>> pool_argmax;  // per layer slot
    Tensor features;  // post-ReLU first-FC activations, when requested
};

inline ForwardResult forward(const NetworkSpec& net, Parameters& params, const Tensor& batch,
                             Mode mode, bool want_features = false) {
    if (batch.rank() != 5 || batch.extent(1) != net.input_shape[0] ||
        batch.extent(2) != net.input_shape[1] || batch.extent(3) != net.input_shape[2] ||
        batch.extent(4) != net.input_shape[3])
        throw Error(Errc::config, "forward: batch shape " + batch.shape().str() +
                                      " does not match the network input");

    const bool keep = mode == Mode::train;
    const std::size_t L = net.layers.size();
    ForwardResult res;
    if (keep) {
        res.activations.resize(L);
        res.bn_cache.resize(L);
        res.pool_argmax.resize(L);
    }
    const std::size_t feat_idx = want_features ? feature_layer_index(net) : 0;

    Tensor cur = batch;
    for (std::size_t li = 0; li < L; ++li) {
        if (keep) res.activations[li] = cur;
        const LayerSpec& layer = net.layers[li];
        if (std::holds_alternative<ConvSpec>(layer)) {
            cur = conv_forward(cur, std::get<ConvSpec>(layer), std::get<ConvParams>(params.layers[li]));
        } else if (std::holds_alternative<BatchNormSpec>(layer)) {
            BatchNormCache scratch;
            cur = batchnorm_forward(cur, std::get<BatchNormSpec>(layer),
                                    std::get<BatchNormParams>(params.layers[li]), mode,
                                    keep ? &res.bn_cache[li] : &scratch);
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            cur = relu_forward(cur);
        } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
            auto pooled = maxpool_forward(cur, std::get<MaxPoolSpec>(layer));
            cur = std::move(pooled.output);
            if (keep) res.pool_argmax[li] = std::move(pooled.argmax);
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            cur = reshape(cur, Shape{cur.extent(0), cur.count() / cur.extent(0)});
        } else if (std::holds_alternative<FcSpec>(layer)) {
            cur = fc_forward(cur, std::get<FcSpec>(layer), std::get<FcParams>(params.layers[li]));
        } else {
            res.logits = cur;
            cur = softmax_forward(cur);
        }
        if (want_features && li == feat_idx) res.features = cur;
    }
    res.probs = std::move(cur);
    return res;
}

/// Gradients share the Parameters layout.
inline Parameters backward(const NetworkSpec& net, Parameters& params, const ForwardResult& cache,
                           const std::vector<int>& labels) {
    if (cache.activations.empty())
        throw Error(Errc::config, "backward: requires a train-mode forward cache");
    if (labels.size() != cache.probs.extent(0))
        throw Error(Errc::config, "backward: label count does not match the cached batch");

    Parameters grads;
    grads.layers.resize(net.layers.size());

    Tensor delta = softmax_ce_backward(cache.probs, labels);
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const LayerSpec& layer = net.layers[li];
        if (std::holds_alternative<SoftmaxSpec>(layer)) {
            continue;  // folded into softmax_ce_backward
        } else if (std::holds_alternative<FcSpec>(layer)) {
            auto g = fc_backward(cache.activations[li], delta, std::get<FcSpec>(layer),
                                 std::get<FcParams>(params.layers[li]));
            grads.layers[li] = FcParams{std::move(g.dw), std::move(g.db)};
            delta = std::move(g.dx);
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            delta = reshape(delta, cache.activations[li].shape());
        } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
            delta = maxpool_backward(cache.activations[li].shape(), delta, cache.pool_argmax[li]);
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            delta = relu_backward(cache.activations[li], delta);
        } else if (std::holds_alternative<BatchNormSpec>(layer)) {
            auto g = batchnorm_backward(delta, std::get<BatchNormSpec>(layer),
                                        std::get<BatchNormParams>(params.layers[li]),
                                        cache.bn_cache[li]);
            BatchNormParams gp;
            gp.gamma = std::move(g.dgamma);
            gp.beta = std::move(g.dbeta);
            grads.layers[li] = std::move(gp);
            delta = std::move(g.dx);
        } else {
            auto g = conv_backward(cache.activations[li], delta, std::get<ConvSpec>(layer),
                                   std::get<ConvParams>(params.layers[li]));
            grads.layers[li] = ConvParams{std::move(g.dw), std::move(g.db)};
            delta = std::move(g.dx);
        }
    }
    return grads;
}

/// Post-ReLU activations of the first FC layer, eval mode; rows align with
/// the batch order.
inline Tensor extract_features(const NetworkSpec& net, Parameters& params, const Tensor& batch) {
    auto res = forward(net, params, batch, Mode::eval, /*want_features=*/true);
    return res.features;
}

}  // namespace voxbag

#endif  // VOXBAG_CNN_NETWORK_HPP_
