#ifndef VOXBAG_CNN_TRAIN_HPP_
#define VOXBAG_CNN_TRAIN_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "voxbag/cnn/network.hpp"
#include "voxbag/dataset.hpp"
#include "voxbag/error.hpp"
#include "voxbag/rng.hpp"

namespace voxbag {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 8;
    std::size_t epochs = 20;
    std::uint64_t seed = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;      // mean training loss over the epoch's batches
    double accuracy = 0.0;  // eval-mode training accuracy after the epoch
};

namespace detail {

// learning_rate 0 is allowed: it makes every update a null update, which
// the tests rely on as a linearity probe of the SGD step.
inline void check_train_config(const TrainConfig& cfg) {
    if (cfg.learning_rate < 0.0) throw Error(Errc::config, "train: learning_rate must be >= 0");
    if (cfg.batch_size < 1) throw Error(Errc::config, "train: batch_size must be >= 1");
}

inline Tensor assemble_batch(const std::vector<LabeledSample>& samples,
                             const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                             const std::array<std::size_t, 4>& input_shape,
                             std::vector<int>* labels) {
    const std::size_t n = hi - lo;
    Tensor batch(
        Shape{n, input_shape[0], input_shape[1], input_shape[2], input_shape[3]});
    const std::size_t sample_count = input_shape[0] * input_shape[1] * input_shape[2] * input_shape[3];
    if (labels) labels->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LabeledSample& s = samples[idx[lo + i]];
        if (s.features.count() != sample_count)
            throw Error(Errc::data, "train: sample '" + s.subject_id + "' has " +
                                        std::to_string(s.features.count()) + " values, expected " +
                                        std::to_string(sample_count));
        for (std::size_t v = 0; v < sample_count; ++v) batch[i * sample_count + v] = s.features[v];
        if (labels) (*labels)[i] = s.label;
    }
    return batch;
}

/// v <- momentum*v - lr*g;  p <- p + v
inline void sgd_step(Tensor& param, Tensor& velocity, const Tensor& grad, double lr, double momentum) {
    for (std::size_t i = 0; i < param.count(); ++i) {
        velocity[i] = static_cast<float>(momentum * velocity[i] - lr * grad[i]);
        param[i] += velocity[i];
    }
}

}  // namespace detail

struct TrainResult {
    Parameters params;
    std::vector<EpochStats> trace;
};

/// SGD with momentum over seeded per-epoch shuffles. Deterministic for a
/// fixed (seed, config, data) on a single worker. A non-finite loss aborts
/// with the offending epoch and batch.
inline TrainResult train(const NetworkSpec& net, Parameters params,
                         const std::vector<LabeledSample>& samples, const TrainConfig& cfg) {
    detail::check_train_config(cfg);
    if (samples.empty()) throw Error(Errc::data, "train: empty dataset");
    bool has0 = false, has1 = false;
    for (const auto& s : samples) {
        if (s.label != 0 && s.label != 1) throw Error(Errc::data, "train: labels must be 0 or 1");
        (s.label == 0 ? has0 : has1) = true;
    }
    if (!has0 || !has1) throw Error(Errc::data, "train: both classes must be present");

    // one velocity tensor per parameter tensor, all zero-initialized
    Parameters velocity;
    velocity.layers.resize(params.layers.size());
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        if (std::holds_alternative<ConvParams>(params.layers[li])) {
            const auto& p = std::get<ConvParams>(params.layers[li]);
            velocity.layers[li] = ConvParams{Tensor(p.w.shape()), Tensor(p.b.shape())};
        } else if (std::holds_alternative<BatchNormParams>(params.layers[li])) {
            const auto& p = std::get<BatchNormParams>(params.layers[li]);
            BatchNormParams v;
            v.gamma = Tensor(p.gamma.shape());
            v.beta = Tensor(p.beta.shape());
            velocity.layers[li] = std::move(v);
        } else if (std::holds_alternative<FcParams>(params.layers[li])) {
            const auto& p = std::get<FcParams>(params.layers[li]);
            velocity.layers[li] = FcParams{Tensor(p.w.shape()), Tensor(p.b.shape())};
        }
    }

    Rng shuffle_rng = Rng(cfg.seed).derive(0x7261696eULL);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i-- > 1;) {
            const std::size_t j = static_cast<std::size_t>(shuffle_rng.next_below(i + 1));
            std::swap(order[i], order[j]);
        }
        double loss_acc = 0.0;
        std::size_t batches = 0;
        for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
            const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
            std::vector<int> labels;
            Tensor batch = detail::assemble_batch(samples, order, lo, hi, net.input_shape, &labels);
            auto fwd = forward(net, params, batch, Mode::train);
            const double loss = cross_entropy(fwd.probs, labels);
            if (!std::isfinite(loss))
                throw Error(Errc::numeric, "train: non-finite loss at epoch " + std::to_string(epoch) +
                                               ", batch " + std::to_string(batches));
            loss_acc += loss;
            ++batches;
            Parameters grads = backward(net, params, fwd, labels);
            for (std::size_t li = 0; li < params.layers.size(); ++li) {
                if (std::holds_alternative<ConvParams>(params.layers[li])) {
                    auto& p = std::get<ConvParams>(params.layers[li]);
                    auto& v = std::get<ConvParams>(velocity.layers[li]);
                    const auto& g = std::get<ConvParams>(grads.layers[li]);
                    detail::sgd_step(p.w, v.w, g.w, cfg.learning_rate, cfg.momentum);
                    detail::sgd_step(p.b, v.b, g.b, cfg.learning_rate, cfg.momentum);
                } else if (std::holds_alternative<BatchNormParams>(params.layers[li])) {
                    auto& p = std::get<BatchNormParams>(params.layers[li]);
                    auto& v = std::get<BatchNormParams>(velocity.layers[li]);
                    const auto& g = std::get<BatchNormParams>(grads.layers[li]);
                    detail::sgd_step(p.gamma, v.gamma, g.gamma, cfg.learning_rate, cfg.momentum);
                    detail::sgd_step(p.beta, v.beta, g.beta, cfg.learning_rate, cfg.momentum);
                } else if (std::holds_alternative<FcParams>(params.layers[li])) {
                    auto& p = std::get<FcParams>(params.layers[li]);
                    auto& v = std::get<FcParams>(velocity.layers[li]);
                    const auto& g = std::get<FcParams>(grads.layers[li]);
                    detail::sgd_step(p.w, v.w, g.w, cfg.learning_rate, cfg.momentum);
                    detail::sgd_step(p.b, v.b, g.b, cfg.learning_rate, cfg.momentum);
                }
            }
        }

        // eval-mode accuracy over the training set
        std::size_t hits = 0;
        std::vector<std::size_t> seq(samples.size());
        for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = i;
        for (std::size_t lo = 0; lo < seq.size(); lo += cfg.batch_size) {
            const std::size_t hi = std::min(lo + cfg.batch_size, seq.size());
            std::vector<int> labels;
            Tensor batch = detail::assemble_batch(samples, seq, lo, hi, net.input_shape, &labels);
            auto fwd = forward(net, params, batch, Mode::eval);
            for (std::size_t b = 0; b < labels.size(); ++b) {
                const float p1 = fwd.probs[b * 2 + 1];
                const float p0 = fwd.probs[b * 2 + 0];
                if ((p1 > p0 ? 1 : 0) == labels[b]) ++hits;
            }
        }
        result.trace.push_back(
            {epoch, loss_acc / static_cast<double>(batches),
             static_cast<double>(hits) / static_cast<double>(samples.size())});
    }
    result.params = std::move(params);
    return result;
}

}  // namespace voxbag

#endif  // VOXBAG_CNN_TRAIN_HPP_
