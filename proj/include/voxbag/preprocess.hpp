#ifndef VOXBAG_PREPROCESS_HPP_
#define VOXBAG_PREPROCESS_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "voxbag/error.hpp"
#include "voxbag/nifti.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

struct NormalizeResult {
    Volume volume;
    bool degenerate = false;  // input was (near-)constant; output is all zeros
};

/// Zero-mean / unit-variance intensity normalization. A near-constant
/// input (population std < 1e-8) yields an all-zero volume with the
/// degenerate flag set instead of a hard failure.
inline NormalizeResult intensity_normalize(const Volume& vol) {
    const std::size_t n = vol.data.count();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += vol.data[i];
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = vol.data[i] - mean;
        sq += d * d;
    }
    const double std_dev = std::sqrt(sq / static_cast<double>(n));

    NormalizeResult res;
    res.volume.spacing_mm = vol.spacing_mm;
    if (std_dev < 1e-8) {
        res.volume.data = Tensor(vol.data.shape(), 0.0f);
        res.degenerate = true;
        return res;
    }
    Tensor out(vol.data.shape());
    const double inv = 1.0 / std_dev;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>((vol.data[i] - mean) * inv);
    res.volume.data = std::move(out);
    return res;
}

/// Indices of k evenly spaced axial slices centered on the mid-depth
/// plane: step = floor(depth / k), center = floor((depth-1)/2).
inline std::vector<std::size_t> axial_slice_indices(std::size_t depth, std::size_t k) {
    if (k < 1 || k > depth)
        throw Error(Errc::config, "extract_axial_slices: k must satisfy 1 <= k <= depth");
    const std::size_t step = depth / k;
    const std::size_t center = (depth - 1) / 2;
    const std::size_t start = center - ((k - 1) * step) / 2;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = start + i * step;
    return idx;
}

/// k full height x width planes in ascending depth order.
inline std::vector<Tensor> extract_axial_slices(const Volume& vol, std::size_t k) {
    const auto idx = axial_slice_indices(vol.depth(), k);
    const std::size_t plane = vol.height() * vol.width();
    std::vector<Tensor> slices;
    slices.reserve(k);
    for (std::size_t z : idx) {
        Tensor s(Shape{vol.height(), vol.width()});
        const float* src = vol.data.data() + z * plane;
        for (std::size_t i = 0; i < plane; ++i) s[i] = src[i];
        slices.push_back(std::move(s));
    }
    return slices;
}

namespace detail {

// align-corners source coordinate for output index i
inline double resample_coord(std::size_t i, std::size_t out_extent, std::size_t in_extent) {
    if (out_extent == 1) return (static_cast<double>(in_extent) - 1.0) / 2.0;
    return static_cast<double>(i) * (static_cast<double>(in_extent) - 1.0) /
           (static_cast<double>(out_extent) - 1.0);
}

}  // namespace detail

/// Align-corners trilinear resampling to the target extents
/// (depth, height, width). Spacing is rescaled to preserve the physical
/// span between the corner voxel centers.
inline Volume resample_trilinear(const Volume& vol, std::size_t out_d, std::size_t out_h,
                                 std::size_t out_w) {
    if (out_d < 1 || out_h < 1 || out_w < 1)
        throw Error(Errc::config, "resample: target extents must be >= 1");

    const std::size_t in_d = vol.depth(), in_h = vol.height(), in_w = vol.width();
    Tensor out(Shape{out_d, out_h, out_w});
    const float* src = vol.data.data();
    float* dst = out.data();

    std::size_t o = 0;
    for (std::size_t z = 0; z < out_d; ++z) {
        const double fz = detail::resample_coord(z, out_d, in_d);
        const std::size_t z0 = static_cast<std::size_t>(fz);
        const std::size_t z1 = z0 + 1 < in_d ? z0 + 1 : z0;
        const double wz = fz - static_cast<double>(z0);
        for (std::size_t y = 0; y < out_h; ++y) {
            const double fy = detail::resample_coord(y, out_h, in_h);
            const std::size_t y0 = static_cast<std::size_t>(fy);
            const std::size_t y1 = y0 + 1 < in_h ? y0 + 1 : y0;
            const double wy = fy - static_cast<double>(y0);
            for (std::size_t x = 0; x < out_w; ++x, ++o) {
                const double fx = detail::resample_coord(x, out_w, in_w);
                const std::size_t x0 = static_cast<std::size_t>(fx);
                const std::size_t x1 = x0 + 1 < in_w ? x0 + 1 : x0;
                const double wx = fx - static_cast<double>(x0);

                auto at = [&](std::size_t zz, std::size_t yy, std::size_t xx) {
                    return static_cast<double>(src[(zz * in_h + yy) * in_w + xx]);
                };
                const double c00 = at(z0, y0, x0) * (1 - wx) + at(z0, y0, x1) * wx;
                const double c01 = at(z0, y1, x0) * (1 - wx) + at(z0, y1, x1) * wx;
                const double c10 = at(z1, y0, x0) * (1 - wx) + at(z1, y0, x1) * wx;
                const double c11 = at(z1, y1, x0) * (1 - wx) + at(z1, y1, x1) * wx;
                const double c0 = c00 * (1 - wy) + c01 * wy;
                const double c1 = c10 * (1 - wy) + c11 * wy;
                dst[o] = static_cast<float>(c0 * (1 - wz) + c1 * wz);
            }
        }
    }

    Volume res;
    res.data = std::move(out);
    auto rescale = [](float spacing, std::size_t in, std::size_t out) {
        if (out > 1)
            return static_cast<float>(spacing * (static_cast<double>(in) - 1.0) /
                                      (static_cast<double>(out) - 1.0));
        return static_cast<float>(spacing * static_cast<double>(in));
    };
    res.spacing_mm = {rescale(vol.spacing_mm[0], in_w, out_w), rescale(vol.spacing_mm[1], in_h, out_h),
                      rescale(vol.spacing_mm[2], in_d, out_d)};
    return res;
}

}  // namespace voxbag

#endif  // VOXBAG_PREPROCESS_HPP_
