#ifndef VOXBAG_CNN_LAYERS_HPP_
#define VOXBAG_CNN_LAYERS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "voxbag/error.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

// Activations are rank-5 [batch, channel, depth, height, width] until
// Flatten, rank-2 [batch, features] after.

struct ConvSpec {
    std::size_t in_ch = 1, out_ch = 1;
    std::size_t kd = 3, kh = 3, kw = 3;  // kh = kw = n (spatial), kd = t (temporal)
    std::size_t stride = 1;
    std::size_t pad_d = 1, pad_h = 1, pad_w = 1;
};

struct BatchNormSpec {
    std::size_t channels = 1;
    float eps = 1e-5f;
    float momentum = 0.1f;  // running <- (1-momentum)*running + momentum*batch
};

struct ReluSpec {};

struct MaxPoolSpec {
    std::size_t kd = 2, kh = 2, kw = 2;
    std::size_t sd = 2, sh = 2, sw = 2;
};

struct FlattenSpec {};

struct FcSpec {
    std::size_t in_dim = 1, out_dim = 1;
};

struct SoftmaxSpec {
    std::size_t classes = 2;
};

using LayerSpec =
    std::variant<ConvSpec, BatchNormSpec, ReluSpec, MaxPoolSpec, FlattenSpec, FcSpec, SoftmaxSpec>;

struct ConvParams {
    Tensor w;  // [out_ch, in_ch, kd, kh, kw]
    Tensor b;  // [out_ch]
};

struct BatchNormParams {
    Tensor gamma, beta;              // [channels]
    Tensor running_mean, running_var;  // [channels]
};

struct FcParams {
    Tensor w;  // [out_dim, in_dim]
    Tensor b;  // [out_dim]
};

using LayerParams = std::variant<std::monostate, ConvParams, BatchNormParams, FcParams>;

/// Learned state, one slot per layer (monostate for parameterless layers).
struct Parameters {
    std::vector<LayerParams> layers;
};

enum class Mode { train, eval };

namespace gemm_detail {

// all three accumulate into C over k ascending per element: bit-reproducible

/// C[m x n] += A[m x k] * B[k x n]
inline void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                    std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float aik = a[i * k + kk];
            const float* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

/// C[m x n] += A[m x k] * B^T, B stored [n x k]
inline void gemm_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                    std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        float* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            float acc = 0.0f;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            crow[j] += acc;
        }
    }
}

/// C[m x n] += A^T * B, A stored [k x m], B stored [k x n]
inline void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k,
                    std::size_t n) {
    for (std::size_t kk = 0; kk < k; ++kk) {
        const float* arow = a + kk * m;
        const float* brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const float aik = arow[i];
            float* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

}  // namespace gemm_detail

// ---- convolution ------------------------------------------------------------

struct ConvDims {
    std::size_t od, oh, ow;
    std::size_t patch;    // in_ch * kd * kh * kw
    std::size_t out_spatial;  // od * oh * ow
};

inline ConvDims conv_output_dims(const ConvSpec& s, std::size_t d, std::size_t h, std::size_t w) {
    auto out = [&](std::size_t in, std::size_t pad, std::size_t k) -> std::size_t {
        const std::ptrdiff_t v = static_cast<std::ptrdiff_t>(in + 2 * pad) - static_cast<std::ptrdiff_t>(k);
        if (v < 0) throw Error(Errc::config, "conv: kernel larger than padded input");
        return static_cast<std::size_t>(v) / s.stride + 1;
    };
    ConvDims cd{out(d, s.pad_d, s.kd), out(h, s.pad_h, s.kh), out(w, s.pad_w, s.kw), 0, 0};
    cd.patch = s.in_ch * s.kd * s.kh * s.kw;
    cd.out_spatial = cd.od * cd.oh * cd.ow;
    return cd;
}

namespace detail {

/// col[patch x out_spatial] for one sample; out-of-range taps are zero.
inline void im2col(const float* x, const ConvSpec& s, std::size_t d, std::size_t h, std::size_t w,
                   const ConvDims& cd, float* col) {
    const std::size_t hw = h * w;
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < s.in_ch; ++ci) {
        const float* xc = x + ci * d * hw;
        for (std::size_t dz = 0; dz < s.kd; ++dz)
            for (std::size_t dy = 0; dy < s.kh; ++dy)
                for (std::size_t dx = 0; dx < s.kw; ++dx, ++row) {
                    float* crow = col + row * cd.out_spatial;
                    std::size_t o = 0;
                    for (std::size_t od = 0; od < cd.od; ++od) {
                        const std::ptrdiff_t id =
                            static_cast<std::ptrdiff_t>(od * s.stride + dz) -
                            static_cast<std::ptrdiff_t>(s.pad_d);
                        const bool dok = id >= 0 && id < static_cast<std::ptrdiff_t>(d);
                        for (std::size_t oh = 0; oh < cd.oh; ++oh) {
                            const std::ptrdiff_t ih =
                                static_cast<std::ptrdiff_t>(oh * s.stride + dy) -
                                static_cast<std::ptrdiff_t>(s.pad_h);
                            const bool hok = ih >= 0 && ih < static_cast<std::ptrdiff_t>(h);
                            for (std::size_t ow = 0; ow < cd.ow; ++ow, ++o) {
                                const std::ptrdiff_t iw =
                                    static_cast<std::ptrdiff_t>(ow * s.stride + dx) -
                                    static_cast<std::ptrdiff_t>(s.pad_w);
                                crow[o] = (dok && hok && iw >= 0 &&
                                           iw < static_cast<std::ptrdiff_t>(w))
                                              ? xc[(static_cast<std::size_t>(id) * h +
                                                    static_cast<std::size_t>(ih)) *
                                                       w +
                                                   static_cast<std::size_t>(iw)]
                                              : 0.0f;
                            }
                        }
                    }
                }
    }
}

/// scatter-add transpose of im2col
inline void col2im(const float* col, const ConvSpec& s, std::size_t d, std::size_t h, std::size_t w,
                   const ConvDims& cd, float* x) {
    const std::size_t hw = h * w;
    std::size_t row = 0;
    for (std::size_t ci = 0; ci < s.in_ch; ++ci) {
        float* xc = x + ci * d * hw;
        for (std::size_t dz = 0; dz < s.kd; ++dz)
            for (std::size_t dy = 0; dy < s.kh; ++dy)
                for (std::size_t dx = 0; dx < s.kw; ++dx, ++row) {
                    const float* crow = col + row * cd.out_spatial;
                    std::size_t o = 0;
                    for (std::size_t od = 0; od < cd.od; ++od) {
                        const std::ptrdiff_t id =
                            static_cast<std::ptrdiff_t>(od * s.stride + dz) -
                            static_cast<std::ptrdiff_t>(s.pad_d);
                        const bool dok = id >= 0 && id < static_cast<std::ptrdiff_t>(d);
                        for (std::size_t oh = 0; oh < cd.oh; ++oh) {
                            const std::ptrdiff_t ih =
                                static_cast<std::ptrdiff_t>(oh * s.stride + dy) -
                                static_cast<std::ptrdiff_t>(s.pad_h);
                            const bool hok = ih >= 0 && ih < static_cast<std::ptrdiff_t>(h);
                            for (std::size_t ow = 0; ow < cd.ow; ++ow, ++o) {
                                const std::ptrdiff_t iw =
                                    static_cast<std::ptrdiff_t>(ow * s.stride + dx) -
                                    static_cast<std::ptrdiff_t>(s.pad_w);
                                if (dok && hok && iw >= 0 && iw < static_cast<std::ptrdiff_t>(w))
                                    xc[(static_cast<std::size_t>(id) * h +
                                        static_cast<std::size_t>(ih)) *
                                           w +
                                       static_cast<std::size_t>(iw)] += crow[o];
                            }
                        }
                    }
                }
    }
}

}  // namespace detail

/// Valid cross-correlation (no kernel flip) via im2col + gemm.
inline Tensor conv_forward(const Tensor& input, const ConvSpec& spec, const ConvParams& params) {
    if (input.rank() != 5 || input.extent(1) != spec.in_ch)
        throw Error(Errc::config, "conv_forward: input shape " + input.shape().str() +
                                      " does not match in_ch " + std::to_string(spec.in_ch));
    const std::size_t batch = input.extent(0), d = input.extent(2), h = input.extent(3),
                      w = input.extent(4);
    const ConvDims cd = conv_output_dims(spec, d, h, w);

    Tensor out(Shape{batch, spec.out_ch, cd.od, cd.oh, cd.ow});
    std::vector<float> col(cd.patch * cd.out_spatial);
    const std::size_t in_stride = spec.in_ch * d * h * w;
    const std::size_t out_stride = spec.out_ch * cd.out_spatial;
    for (std::size_t b = 0; b < batch; ++b) {
        detail::im2col(input.data() + b * in_stride, spec, d, h, w, cd, col.data());
        float* ob = out.data() + b * out_stride;
        gemm_detail::gemm_nn(params.w.data(), col.data(), ob, spec.out_ch, cd.patch, cd.out_spatial);
        for (std::size_t oc = 0; oc < spec.out_ch; ++oc) {
            const float bias = params.b[oc];
            float* orow = ob + oc * cd.out_spatial;
            for (std::size_t o = 0; o < cd.out_spatial; ++o) orow[o] += bias;
        }
    }
    return out;
}

struct ConvGrads {
    Tensor dw, db, dx;
};

inline ConvGrads conv_backward(const Tensor& input, const Tensor& dout, const ConvSpec& spec,
                               const ConvParams& params) {
    const std::size_t batch = input.extent(0), d = input.extent(2), h = input.extent(3),
                      w = input.extent(4);
    const ConvDims cd = conv_output_dims(spec, d, h, w);

    ConvGrads g{Tensor(params.w.shape()), Tensor(params.b.shape()), Tensor(input.shape())};
    std::vector<float> col(cd.patch * cd.out_spatial);
    std::vector<float> dcol(cd.patch * cd.out_spatial);
    const std::size_t in_stride = spec.in_ch * d * h * w;
    const std::size_t out_stride = spec.out_ch * cd.out_spatial;
    for (std::size_t b = 0; b < batch; ++b) {
        const float* xb = input.data() + b * in_stride;
        const float* dob = dout.data() + b * out_stride;
        detail::im2col(xb, spec, d, h, w, cd, col.data());
        // dW += dOut_b [out_ch x os] * col^T [os x patch]
        gemm_detail::gemm_nt(dob, col.data(), g.dw.data(), spec.out_ch, cd.out_spatial, cd.patch);
        // dcol = W^T [patch x out_ch] * dOut_b
        std::fill(dcol.begin(), dcol.end(), 0.0f);
        gemm_detail::gemm_tn(params.w.data(), dob, dcol.data(), cd.patch, spec.out_ch, cd.out_spatial);
        detail::col2im(dcol.data(), spec, d, h, w, cd, g.dx.data() + b * in_stride);
        for (std::size_t oc = 0; oc < spec.out_ch; ++oc) {
            double acc = 0.0;
            const float* dorow = dob + oc * cd.out_spatial;
            for (std::size_t o = 0; o < cd.out_spatial; ++o) acc += dorow[o];
            g.db[oc] += static_cast<float>(acc);
        }
    }
    return g;
}

// ---- batch normalization ------------------------------------------------------

struct BatchNormCache {
    Tensor xhat;
    std::vector<double> inv_std;  // per channel, 1/sqrt(var + eps)
};

/// Train mode normalizes with per-channel batch statistics (population
/// variance) and updates the running estimates in place; eval mode uses
/// the running estimates.
inline Tensor batchnorm_forward(const Tensor& input, const BatchNormSpec& spec,
                                BatchNormParams& params, Mode mode,
                                BatchNormCache* cache = nullptr) {
    if (input.rank() != 5 || input.extent(1) != spec.channels)
        throw Error(Errc::config, "batchnorm_forward: channel mismatch for " + input.shape().str());
    const std::size_t batch = input.extent(0), ch = spec.channels;
    const std::size_t spatial = input.extent(2) * input.extent(3) * input.extent(4);
    const std::size_t per_channel = batch * spatial;
    const std::size_t sample_stride = ch * spatial;

    Tensor out(input.shape());
    if (cache) {
        cache->xhat = Tensor(input.shape());
        cache->inv_std.assign(ch, 0.0);
    }

    if (mode == Mode::train && per_channel < 2)
        throw Error(Errc::config, "batchnorm_forward: train mode needs >= 2 values per channel");

    for (std::size_t c = 0; c < ch; ++c) {
        double mean, var;
        if (mode == Mode::train) {
            double acc = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const float* x = input.data() + b * sample_stride + c * spatial;
                for (std::size_t i = 0; i < spatial; ++i) acc += x[i];
            }
            mean = acc / static_cast<double>(per_channel);
            double sq = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const float* x = input.data() + b * sample_stride + c * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    const double diff = x[i] - mean;
                    sq += diff * diff;
                }
            }
            var = sq / static_cast<double>(per_channel);
            params.running_mean[c] = static_cast<float>((1.0 - spec.momentum) * params.running_mean[c] +
                                                        spec.momentum * mean);
            params.running_var[c] = static_cast<float>((1.0 - spec.momentum) * params.running_var[c] +
                                                       spec.momentum * var);
        } else {
            mean = params.running_mean[c];
            var = params.running_var[c];
        }
        const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(spec.eps));
        const float gamma = params.gamma[c], beta = params.beta[c];
        if (cache) cache->inv_std[c] = inv_std;
        for (std::size_t b = 0; b < batch; ++b) {
            const float* x = input.data() + b * sample_stride + c * spatial;
            float* o = out.data() + b * sample_stride + c * spatial;
            float* xh = cache ? cache->xhat.data() + b * sample_stride + c * spatial : nullptr;
            for (std::size_t i = 0; i < spatial; ++i) {
                const float xhat = static_cast<float>((x[i] - mean) * inv_std);
                if (xh) xh[i] = xhat;
                o[i] = gamma * xhat + beta;
            }
        }
    }
    return out;
}

struct BatchNormGrads {
    Tensor dgamma, dbeta, dx;
};

/// Full batch-statistics chain rule:
/// dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
inline BatchNormGrads batchnorm_backward(const Tensor& dout, const BatchNormSpec& spec,
                                         const BatchNormParams& params, const BatchNormCache& cache) {
    const std::size_t batch = dout.extent(0), ch = spec.channels;
    const std::size_t spatial = dout.extent(2) * dout.extent(3) * dout.extent(4);
    const std::size_t per_channel = batch * spatial;
    const std::size_t sample_stride = ch * spatial;

    BatchNormGrads g{Tensor(Shape{ch}), Tensor(Shape{ch}), Tensor(dout.shape())};
    for (std::size_t c = 0; c < ch; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
            const float* dy = dout.data() + b * sample_stride + c * spatial;
            const float* xh = cache.xhat.data() + b * sample_stride + c * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
            }
        }
        g.dbeta[c] = static_cast<float>(sum_dy);
        g.dgamma[c] = static_cast<float>(sum_dy_xhat);
        const double mean_dy = sum_dy / static_cast<double>(per_channel);
        const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(per_channel);
        const double scale = static_cast<double>(params.gamma[c]) * cache.inv_std[c];
        for (std::size_t b = 0; b < batch; ++b) {
            const float* dy = dout.data() + b * sample_stride + c * spatial;
            const float* xh = cache.xhat.data() + b * sample_stride + c * spatial;
            float* dx = g.dx.data() + b * sample_stride + c * spatial;
            for (std::size_t i = 0; i < spatial; ++i)
                dx[i] = static_cast<float>(scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat));
        }
    }
    return g;
}

// ---- relu ---------------------------------------------------------------------

inline Tensor relu_forward(const Tensor& input) { return relu_map(input); }

inline Tensor relu_backward(const Tensor& input, const Tensor& dout) {
    Tensor dx(input.shape());
    for (std::size_t i = 0; i < input.count(); ++i) dx[i] = input[i] > 0.0f ? dout[i] : 0.0f;
    return dx;
}

// ---- max pooling ----------------------------------------------------------------

struct MaxPoolResult {
    Tensor output;
    std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// Floor semantics: trailing partial windows are dropped. Ties take the
/// lowest flat input index.
inline MaxPoolResult maxpool_forward(const Tensor& input, const MaxPoolSpec& spec) {
    if (input.rank() != 5) throw Error(Errc::config, "maxpool_forward: rank-5 input required");
    const std::size_t batch = input.extent(0), ch = input.extent(1), d = input.extent(2),
                      h = input.extent(3), w = input.extent(4);
    if (spec.kd > d || spec.kh > h || spec.kw > w)
        throw Error(Errc::config, "maxpool_forward: window larger than input extent");
    const std::size_t od = (d - spec.kd) / spec.sd + 1;
    const std::size_t oh = (h - spec.kh) / spec.sh + 1;
    const std::size_t ow = (w - spec.kw) / spec.sw + 1;

    MaxPoolResult res;
    res.output = Tensor(Shape{batch, ch, od, oh, ow});
    res.argmax.resize(res.output.count());
    std::size_t o = 0;
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t base = (b * ch + c) * d * h * w;
            for (std::size_t zd = 0; zd < od; ++zd)
                for (std::size_t zh = 0; zh < oh; ++zh)
                    for (std::size_t zw = 0; zw < ow; ++zw, ++o) {
                        float best = -std::numeric_limits<float>::infinity();
                        std::size_t best_idx = 0;
                        for (std::size_t dz = 0; dz < spec.kd; ++dz)
                            for (std::size_t dy = 0; dy < spec.kh; ++dy)
                                for (std::size_t dx = 0; dx < spec.kw; ++dx) {
                                    const std::size_t idx =
                                        base + ((zd * spec.sd + dz) * h + zh * spec.sh + dy) * w +
                                        zw * spec.sw + dx;
                                    if (input[idx] > best) {  // strict: first index wins ties
                                        best = input[idx];
                                        best_idx = idx;
                                    }
                                }
                        res.output[o] = best;
                        res.argmax[o] = static_cast<std::uint32_t>(best_idx);
                    }
        }
    return res;
}

inline Tensor maxpool_backward(const Shape& input_shape, const Tensor& dout,
                               const std::vector<std::uint32_t>& argmax) {
    Tensor dx(input_shape);
    for (std::size_t o = 0; o < dout.count(); ++o) dx[argmax[o]] += dout[o];
    return dx;
}

// ---- fully connected -------------------------------------------------------------

inline Tensor fc_forward(const Tensor& input, const FcSpec& spec, const FcParams& params) {
    if (input.rank() != 2 || input.extent(1) != spec.in_dim)
        throw Error(Errc::config, "fc_forward: input " + input.shape().str() + " vs in_dim " +
                                      std::to_string(spec.in_dim));
    const std::size_t batch = input.extent(0);
    Tensor out(Shape{batch, spec.out_dim});
    gemm_detail::gemm_nt(input.data(), params.w.data(), out.data(), batch, spec.in_dim, spec.out_dim);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t oC = 0; oC < spec.out_dim; ++oC) out[b * spec.out_dim + oC] += params.b[oC];
    return out;
}

struct FcGrads {
    Tensor dw, db, dx;
};

inline FcGrads fc_backward(const Tensor& input, const Tensor& dout, const FcSpec& spec,
                           const FcParams& params) {
    const std::size_t batch = input.extent(0);
    FcGrads g{Tensor(params.w.shape()), Tensor(params.b.shape()), Tensor(input.shape())};
    // dW[o,i] = sum_b dy[b,o] x[b,i]
    gemm_detail::gemm_tn(dout.data(), input.data(), g.dw.data(), spec.out_dim, batch, spec.in_dim);
    for (std::size_t oC = 0; oC < spec.out_dim; ++oC) {
        double acc = 0.0;
        for (std::size_t b = 0; b < batch; ++b) acc += dout[b * spec.out_dim + oC];
        g.db[oC] = static_cast<float>(acc);
    }
    // dx = dy * W
    gemm_detail::gemm_nn(dout.data(), params.w.data(), g.dx.data(), batch, spec.out_dim, spec.in_dim);
    return g;
}

// ---- softmax + cross entropy --------------------------------------------------------

/// Row softmax with max subtraction.
inline Tensor softmax_forward(const Tensor& logits) {
    if (logits.rank() != 2) throw Error(Errc::config, "softmax_forward: rank-2 logits required");
    const std::size_t batch = logits.extent(0), classes = logits.extent(1);
    Tensor probs(logits.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        const float* row = logits.data() + b * classes;
        float mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(row[c] - mx));
        for (std::size_t c = 0; c < classes; ++c)
            probs[b * classes + c] =
                static_cast<float>(std::exp(static_cast<double>(row[c] - mx)) / denom);
    }
    return probs;
}

/// Mean cross-entropy over the batch.
inline double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t batch = probs.extent(0), classes = probs.extent(1);
    if (labels.size() != batch) throw Error(Errc::config, "cross_entropy: label count mismatch");
    double acc = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const double p = probs[b * classes + static_cast<std::size_t>(labels[b])];
        acc += -std::log(std::max(p, 1e-30));
    }
    return acc / static_cast<double>(batch);
}

/// d(mean CE)/dlogits = (p - onehot) / batch
inline Tensor softmax_ce_backward(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t batch = probs.extent(0), classes = probs.extent(1);
    Tensor dlogits(probs.shape());
    const float inv = 1.0f / static_cast<float>(batch);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < classes; ++c) {
            const float onehot = static_cast<std::size_t>(labels[b]) == c ? 1.0f : 0.0f;
            dlogits[b * classes + c] = (probs[b * classes + c] - onehot) * inv;
        }
    return dlogits;
}

}  // namespace voxbag

#endif  // VOXBAG_CNN_LAYERS_HPP_
