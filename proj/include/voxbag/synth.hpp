#ifndef VOXBAG_SYNTH_HPP_
#define VOXBAG_SYNTH_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>

#include "voxbag/dataset.hpp"
#include "voxbag/error.hpp"
#include "voxbag/nifti.hpp"
#include "voxbag/rng.hpp"

namespace voxbag {

/// Synthetic stand-in for the clinical datasets: Gaussian noise volumes,
/// with class SCZ carrying an attenuated spherical blob at the center
/// (intensity subtracted, emulating a structural deficit).
struct SynthConfig {
    std::size_t per_class = 100;
    std::array<std::size_t, 3> extents{16, 16, 16};  // depth, height, width
    double noise_sigma = 1.0;
    double blob_amplitude = 2.0;
    double blob_radius = 4.0;  // voxels
    std::uint64_t seed = 0;
};

inline void validate_synth(const SynthConfig& cfg) {
    if (cfg.per_class < 1) throw Error(Errc::config, "synth: per_class must be >= 1");
    for (std::size_t e : cfg.extents)
        if (e < 1) throw Error(Errc::config, "synth: extents must be >= 1");
    if (cfg.noise_sigma < 0.0 || cfg.blob_amplitude < 0.0)
        throw Error(Errc::config, "synth: sigma and amplitude must be >= 0");
    const std::size_t min_extent = std::min({cfg.extents[0], cfg.extents[1], cfg.extents[2]});
    if (cfg.blob_radius <= 0.0 || 2.0 * cfg.blob_radius > static_cast<double>(min_extent))
        throw Error(Errc::config, "synth: blob must fit inside the volume extents");
}

/// One volume, deterministic per (seed, class, index).
inline Volume synth_volume(const SynthConfig& cfg, int cls, std::size_t index) {
    validate_synth(cfg);
    Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(cls)).derive(index);
    const std::size_t d = cfg.extents[0], h = cfg.extents[1], w = cfg.extents[2];
    Volume vol;
    vol.data = Tensor(Shape{d, h, w});
    vol.spacing_mm = {1.0f, 1.0f, 1.0f};
    const double cz = (static_cast<double>(d) - 1.0) / 2.0;
    const double cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double cx = (static_cast<double>(w) - 1.0) / 2.0;
    const double two_r2 = 2.0 * cfg.blob_radius * cfg.blob_radius;
    std::size_t i = 0;
    for (std::size_t z = 0; z < d; ++z)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x, ++i) {
                double v = cfg.noise_sigma * rng.normal();
                if (cls == 1) {
                    const double r2 = (z - cz) * (z - cz) + (y - cy) * (y - cy) + (x - cx) * (x - cx);
                    v -= cfg.blob_amplitude * std::exp(-r2 / two_r2);
                }
                vol.data[i] = static_cast<float>(v);
            }
    return vol;
}

/// Writes per-class .nii volumes plus the manifest CSV; returns the manifest.
inline DatasetManifest generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
    validate_synth(cfg);
    std::filesystem::create_directories(out_dir);
    DatasetManifest manifest;
    for (int cls = 0; cls < 2; ++cls) {
        for (std::size_t i = 0; i < cfg.per_class; ++i) {
            std::ostringstream name;
            name << (cls == 0 ? "cn_" : "scz_") << std::setfill('0') << std::setw(4) << i;
            const std::string file = name.str() + ".nii";
            Volume vol = synth_volume(cfg, cls, i);
            write_nifti(vol, (std::filesystem::path(out_dir) / file).string());
            ManifestRecord rec;
            rec.subject_id = name.str();
            rec.path = file;  // manifest-relative
            rec.label = cls == 0 ? ClassLabel::CN : ClassLabel::SCZ;
            rec.tr_ms = 2000.0;
            rec.te_ms = 30.0;
            rec.flip_angle_deg = 9.0;
            rec.slice_thickness_mm = 1.0;
            manifest.records.push_back(std::move(rec));
        }
    }
    write_manifest(manifest, (std::filesystem::path(out_dir) / "manifest.csv").string());
    return manifest;
}

}  // namespace voxbag

#endif  // VOXBAG_SYNTH_HPP_
