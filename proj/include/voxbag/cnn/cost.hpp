#ifndef VOXBAG_CNN_COST_HPP_
#define VOXBAG_CNN_COST_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "voxbag/cnn/network.hpp"
#include "voxbag/error.hpp"

namespace voxbag {

/// Symbols of the cost model: image extents M, N, K; an n x n x t kernel
/// over c input channels producing W filters; B bags of D classifiers.
struct CostParams {
    std::uint64_t m = 1, n_dim = 1, k = 1;
    std::uint64_t kernel_n = 1, kernel_t = 1;
    std::uint64_t channels = 1, filters = 1;
    std::uint64_t bags = 1, classifiers = 1;
};

/// Multiply-accumulate count of one conv layer: M*N*K*n^2*c*t*W, exact.
inline std::uint64_t conv_cost(const CostParams& p) {
    if (p.m < 1 || p.n_dim < 1 || p.k < 1 || p.kernel_n < 1 || p.kernel_t < 1 || p.channels < 1 ||
        p.filters < 1)
        throw Error(Errc::config, "conv_cost: all parameters must be >= 1");
    return p.m * p.n_dim * p.k * p.kernel_n * p.kernel_n * p.channels * p.kernel_t * p.filters;
}

/// B * D
inline std::uint64_t ensemble_cost(const CostParams& p) {
    if (p.bags < 1 || p.classifiers < 1)
        throw Error(Errc::config, "ensemble_cost: bags and classifiers must be >= 1");
    return p.bags * p.classifiers;
}

struct LayerCost {
    std::size_t layer_index = 0;
    CostParams params;
    std::uint64_t macs = 0;
};

struct NetworkCost {
    std::vector<LayerCost> conv_layers;
    std::uint64_t conv_total = 0;
    std::uint64_t ensemble = 0;
    std::uint64_t total = 0;
};

/// Per-conv-layer breakdown for a concrete network: each layer contributes
/// (output extents) x n^2 x c x t x W, summed, plus the B*D ensemble term.
inline NetworkCost network_cost(const NetworkSpec& net, std::uint64_t bags,
                                std::uint64_t classifiers) {
    validate_network(net);
    NetworkCost total;
    std::size_t d = net.input_shape[1], h = net.input_shape[2], w = net.input_shape[3];
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const LayerSpec& layer = net.layers[li];
        if (std::holds_alternative<ConvSpec>(layer)) {
            const auto& s = std::get<ConvSpec>(layer);
            const ConvDims cd = conv_output_dims(s, d, h, w);
            CostParams p;
            p.m = cd.oh;
            p.n_dim = cd.ow;
            p.k = cd.od;
            p.kernel_n = s.kh;
            p.kernel_t = s.kd;
            p.channels = s.in_ch;
            p.filters = s.out_ch;
            p.bags = bags;
            p.classifiers = classifiers;
            const std::uint64_t macs = conv_cost(p);
            total.conv_layers.push_back({li, p, macs});
            total.conv_total += macs;
            d = cd.od;
            h = cd.oh;
            w = cd.ow;
        } else if (std::holds_alternative<MaxPoolSpec>(layer)) {
            const auto& s = std::get<MaxPoolSpec>(layer);
            d = (d - s.kd) / s.sd + 1;
            h = (h - s.kh) / s.sh + 1;
            w = (w - s.kw) / s.sw + 1;
        }
    }
    CostParams ens;
    ens.bags = bags;
    ens.classifiers = classifiers;
    total.ensemble = ensemble_cost(ens);
    total.total = total.conv_total + total.ensemble;
    return total;
}

}  // namespace voxbag

#endif  // VOXBAG_CNN_COST_HPP_
