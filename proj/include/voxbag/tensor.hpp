#ifndef VOXBAG_TENSOR_HPP_
#define VOXBAG_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "voxbag/error.hpp"

namespace voxbag {

/// Extents of a dense row-major array. Rank is at most 5
/// (batch, channel, depth, height, width is the largest layout used).
class Shape {
public:
    static constexpr std::size_t kMaxRank = 5;

    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
    const std::vector<std::size_t>& dims() const { return dims_; }

    std::size_t count() const {
        std::size_t n = 1;
        for (std::size_t d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return dims_ != o.dims_; }

    std::string str() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
        os << "]";
        return os.str();
    }

private:
    void validate() const {
        if (dims_.size() > kMaxRank)
            throw Error(Errc::config, "shape rank " + std::to_string(dims_.size()) +
                                          " exceeds maximum " + std::to_string(kMaxRank));
        for (std::size_t d : dims_)
            if (d < 1) throw Error(Errc::config, "shape extent must be >= 1, got " + str());
    }

    std::vector<std::size_t> dims_;
};

/// Dense N-dimensional float32 array, flat row-major storage.
/// Treated as an immutable value once built; mutation happens only through
/// the explicit data() accessor on a tensor a single owner is still filling.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f)
        : shape_(std::move(shape)), data_(shape_.count(), fill) {}
    Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_.count())
            throw Error(Errc::config, "tensor data length " + std::to_string(data_.size()) +
                                          " does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.rank(); }
    std::size_t count() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_[axis]; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    const std::vector<float>& values() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    Shape shape_;
    std::vector<float> data_;
};

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw Error(Errc::config, std::string(op) + ": shape mismatch " + a.shape().str() +
                                      " vs " + b.shape().str());
}

}  // namespace detail

// ---- elementwise ---------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.count(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.count(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.count(); ++i) out[i] = a[i] * b[i];
    return out;
}

inline Tensor scale(const Tensor& a, float s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.count(); ++i) out[i] = a[i] * s;
    return out;
}

inline Tensor add_scalar(const Tensor& a, float s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.count(); ++i) out[i] = a[i] + s;
    return out;
}

inline Tensor relu_map(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.count(); ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
    return out;
}

// ---- matmul --------------------------------------------------------------

/// C[m x n] = A[m x k] * B[k x n]. Row-major ikj loop; per output element the
/// accumulation runs over k ascending, so results are bit-reproducible.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw Error(Errc::config, "matmul: expected rank-2 operands, got " + a.shape().str() +
                                      " and " + b.shape().str());
    const std::size_t m = a.extent(0), k = a.extent(1);
    const std::size_t k2 = b.extent(0), n = b.extent(1);
    if (k != k2)
        throw Error(Errc::config, "matmul: inner dimensions disagree, " + a.shape().str() +
                                      " vs " + b.shape().str());
    Tensor c(Shape{m, n});
    const float* pa = a.data();
    const float* pb = b.data();
    float* pc = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = pc + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const float aik = pa[i * k + kk];
            const float* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// ---- reductions ----------------------------------------------------------

enum class Reduce { sum, mean, var, max };

/// Reduce over the given axes (removed from the output shape). var is the
/// population variance. An empty axis set is the no-op sum and is rejected
/// for every other kind. Accumulation happens in double, deterministically
/// over the flat row-major order.
inline Tensor reduce(const Tensor& t, const std::vector<std::size_t>& axes, Reduce kind) {
    for (std::size_t ax : axes)
        if (ax >= t.rank())
            throw Error(Errc::config,
                        "reduce: axis " + std::to_string(ax) + " out of range for " + t.shape().str());
    if (axes.empty()) {
        if (kind != Reduce::sum) throw Error(Errc::config, "reduce: empty axis set requires kind=sum");
        return t;
    }

    std::vector<bool> reduced(t.rank(), false);
    for (std::size_t ax : axes) reduced[ax] = true;

    std::vector<std::size_t> out_dims;
    std::size_t group = 1;  // number of input elements per output element
    for (std::size_t ax = 0; ax < t.rank(); ++ax) {
        if (reduced[ax])
            group *= t.extent(ax);
        else
            out_dims.push_back(t.extent(ax));
    }
    Shape out_shape(out_dims);  // rank 0 allowed: scalar result
    const std::size_t out_count = out_shape.count();

    // strides for mapping a flat input index to its output slot
    std::vector<std::size_t> in_stride(t.rank(), 1);
    for (std::size_t ax = t.rank(); ax-- > 1;) in_stride[ax - 1] = in_stride[ax] * t.extent(ax);
    std::vector<std::size_t> out_stride(t.rank(), 0);
    {
        std::size_t s = 1;
        for (std::size_t ax = t.rank(); ax-- > 0;) {
            if (!reduced[ax]) {
                out_stride[ax] = s;
                s *= t.extent(ax);
            }
        }
    }
    auto out_index = [&](std::size_t flat) {
        std::size_t o = 0;
        for (std::size_t ax = 0; ax < t.rank(); ++ax) {
            const std::size_t coord = (flat / in_stride[ax]) % t.extent(ax);
            o += coord * out_stride[ax];
        }
        return o;
    };

    Tensor out(out_shape);
    if (kind == Reduce::max) {
        std::vector<bool> seen(out_count, false);
        for (std::size_t i = 0; i < t.count(); ++i) {
            const std::size_t o = out_index(i);
            if (!seen[o] || t[i] > out[o]) {  // strict >: first occurrence wins ties
                out[o] = t[i];
                seen[o] = true;
            }
        }
        return out;
    }

    std::vector<double> acc(out_count, 0.0);
    for (std::size_t i = 0; i < t.count(); ++i) acc[out_index(i)] += t[i];
    if (kind == Reduce::sum) {
        for (std::size_t o = 0; o < out_count; ++o) out[o] = static_cast<float>(acc[o]);
        return out;
    }
    const double inv = 1.0 / static_cast<double>(group);
    if (kind == Reduce::mean) {
        for (std::size_t o = 0; o < out_count; ++o) out[o] = static_cast<float>(acc[o] * inv);
        return out;
    }
    // population variance, two-pass
    std::vector<double> mean(out_count);
    for (std::size_t o = 0; o < out_count; ++o) mean[o] = acc[o] * inv;
    std::vector<double> sq(out_count, 0.0);
    for (std::size_t i = 0; i < t.count(); ++i) {
        const std::size_t o = out_index(i);
        const double d = static_cast<double>(t[i]) - mean[o];
        sq[o] += d * d;
    }
    for (std::size_t o = 0; o < out_count; ++o) out[o] = static_cast<float>(sq[o] * inv);
    return out;
}

inline float reduce_all(const Tensor& t, Reduce kind) {
    if (t.rank() == 0) return kind == Reduce::var ? 0.0f : t[0];
    std::vector<std::size_t> axes(t.rank());
    std::iota(axes.begin(), axes.end(), 0);
    return reduce(t, axes, kind)[0];
}

// ---- reshape / pad / slice ------------------------------------------------

inline Tensor reshape(const Tensor& t, Shape new_shape) {
    if (new_shape.count() != t.count())
        throw Error(Errc::config, "reshape: element count mismatch " + t.shape().str() + " -> " +
                                      new_shape.str());
    return Tensor(std::move(new_shape), t.values());
}

/// Zero padding; pads[axis] = {before, after}.
inline Tensor pad_zero(const Tensor& t, const std::vector<std::pair<std::size_t, std::size_t>>& pads) {
    if (pads.size() != t.rank()) throw Error(Errc::config, "pad_zero: one pad pair per axis required");
    std::vector<std::size_t> out_dims(t.rank());
    for (std::size_t ax = 0; ax < t.rank(); ++ax)
        out_dims[ax] = t.extent(ax) + pads[ax].first + pads[ax].second;
    Tensor out{Shape(out_dims)};

    std::vector<std::size_t> in_stride(t.rank(), 1), out_stride(t.rank(), 1);
    for (std::size_t ax = t.rank(); ax-- > 1;) {
        in_stride[ax - 1] = in_stride[ax] * t.extent(ax);
        out_stride[ax - 1] = out_stride[ax] * out_dims[ax];
    }
    for (std::size_t i = 0; i < t.count(); ++i) {
        std::size_t o = 0;
        for (std::size_t ax = 0; ax < t.rank(); ++ax) {
            const std::size_t coord = (i / in_stride[ax]) % t.extent(ax);
            o += (coord + pads[ax].first) * out_stride[ax];
        }
        out[o] = t[i];
    }
    return out;
}

/// Copy of the region starting at `start` with the given extents.
inline Tensor slice_region(const Tensor& t, const std::vector<std::size_t>& start,
                           const std::vector<std::size_t>& extents) {
    if (start.size() != t.rank() || extents.size() != t.rank())
        throw Error(Errc::config, "slice_region: start/extents must match rank");
    for (std::size_t ax = 0; ax < t.rank(); ++ax)
        if (extents[ax] < 1 || start[ax] + extents[ax] > t.extent(ax))
            throw Error(Errc::config, "slice_region: out-of-range slice on axis " + std::to_string(ax));

    Tensor out{Shape(extents)};
    std::vector<std::size_t> in_stride(t.rank(), 1), out_stride(t.rank(), 1);
    for (std::size_t ax = t.rank(); ax-- > 1;) {
        in_stride[ax - 1] = in_stride[ax] * t.extent(ax);
        out_stride[ax - 1] = out_stride[ax] * extents[ax];
    }
    for (std::size_t o = 0; o < out.count(); ++o) {
        std::size_t i = 0;
        for (std::size_t ax = 0; ax < t.rank(); ++ax) {
            const std::size_t coord = (o / out_stride[ax]) % extents[ax];
            i += (coord + start[ax]) * in_stride[ax];
        }
        out[o] = t[i];
    }
    return out;
}

inline bool all_finite(const Tensor& t) {
    for (std::size_t i = 0; i < t.count(); ++i)
        if (!std::isfinite(t[i])) return false;
    return true;
}

}  // namespace voxbag

#endif  // VOXBAG_TENSOR_HPP_
