#ifndef VOXBAG_NIFTI_HPP_
#define VOXBAG_NIFTI_HPP_

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "voxbag/error.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

/// NIfTI-1 single-file header, 348 bytes, little-endian on disk.
/// Field layout follows the nifti1.h standard; only the fields this
/// toolkit consumes are interpreted, the rest round-trip untouched.
#pragma pack(push, 1)
struct NiftiHeader {
    std::int32_t sizeof_hdr = 348;  // must be 348
    char data_type[10] = {};
    char db_name[18] = {};
    std::int32_t extents = 0;
    std::int16_t session_error = 0;
    char regular = 'r';
    char dim_info = 0;
    std::int16_t dim[8] = {};       // dim[0] = rank; dim[1]=x, dim[2]=y, dim[3]=z
    float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
    std::int16_t intent_code = 0;
    std::int16_t datatype = 0;      // 4=int16, 16=float32, 64=float64 supported
    std::int16_t bitpix = 0;
    std::int16_t slice_start = 0;
    float pixdim[8] = {};           // voxel spacing in mm per axis
    float vox_offset = 352.0f;      // byte offset of the data section
    float scl_slope = 1.0f;
    float scl_inter = 0.0f;
    std::int16_t slice_end = 0;
    char slice_code = 0;
    char xyzt_units = 2;            // NIFTI_UNITS_MM
    float cal_max = 0, cal_min = 0;
    float slice_duration = 0;
    float toffset = 0;
    std::int32_t glmax = 0, glmin = 0;
    char descrip[80] = {};
    char aux_file[24] = {};
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 0;
    float quatern_b = 0, quatern_c = 0, quatern_d = 0;
    float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
    float srow_x[4] = {};
    float srow_y[4] = {};
    float srow_z[4] = {};
    char intent_name[16] = {};
    char magic[4] = {'n', '+', '1', '\0'};
};
#pragma pack(pop)

static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must pack to 348 bytes");

namespace nifti_dt {
constexpr std::int16_t int16 = 4;
constexpr std::int16_t float32 = 16;
constexpr std::int16_t float64 = 64;
}  // namespace nifti_dt

/// A 3D scan: data[depth][height][width], spacing in mm as (x, y, z) =
/// (width, height, slice) per the NIfTI axis convention.
struct Volume {
    Tensor data;                              // rank 3
    std::array<float, 3> spacing_mm{1, 1, 1};

    std::size_t depth() const { return data.extent(0); }
    std::size_t height() const { return data.extent(1); }
    std::size_t width() const { return data.extent(2); }
};

namespace detail {

template <typename T>
inline void bswap(T& v) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
}

inline void swap_header(NiftiHeader& h) {
    bswap(h.sizeof_hdr);
    bswap(h.extents);
    bswap(h.session_error);
    for (auto& d : h.dim) bswap(d);
    bswap(h.intent_p1);
    bswap(h.intent_p2);
    bswap(h.intent_p3);
    bswap(h.intent_code);
    bswap(h.datatype);
    bswap(h.bitpix);
    bswap(h.slice_start);
    for (auto& p : h.pixdim) bswap(p);
    bswap(h.vox_offset);
    bswap(h.scl_slope);
    bswap(h.scl_inter);
    bswap(h.slice_end);
    bswap(h.cal_max);
    bswap(h.cal_min);
    bswap(h.slice_duration);
    bswap(h.toffset);
    bswap(h.glmax);
    bswap(h.glmin);
    bswap(h.qform_code);
    bswap(h.sform_code);
    bswap(h.quatern_b);
    bswap(h.quatern_c);
    bswap(h.quatern_d);
    bswap(h.qoffset_x);
    bswap(h.qoffset_y);
    bswap(h.qoffset_z);
    for (auto& s : h.srow_x) bswap(s);
    for (auto& s : h.srow_y) bswap(s);
    for (auto& s : h.srow_z) bswap(s);
}

}  // namespace detail

/// Reads a single-file .nii volume. Endianness is detected through the
/// dim[0] in [1,7] heuristic; intensities are rescaled by scl_slope/scl_inter
/// when scl_slope is nonzero.
inline std::pair<NiftiHeader, Volume> read_nifti(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::data, "cannot open NIfTI file: " + path);

    NiftiHeader h;
    in.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(h)))
        throw Error(Errc::data, "truncated NIfTI header: " + path);

    bool swapped = false;
    if (h.dim[0] < 1 || h.dim[0] > 7) {
        detail::swap_header(h);
        swapped = true;
        if (h.dim[0] < 1 || h.dim[0] > 7)
            throw Error(Errc::data, "invalid dim[0] in NIfTI header: " + path);
    }
    if (std::memcmp(h.magic, "n+1", 4) != 0)
        throw Error(Errc::data, "bad NIfTI magic (expected n+1): " + path);
    if (h.sizeof_hdr != 348)
        throw Error(Errc::data, "bad NIfTI header size field (expected 348): " + path);
    if (h.dim[0] != 2 && h.dim[0] != 3)
        throw Error(Errc::data, "unsupported NIfTI rank " + std::to_string(h.dim[0]) + ": " + path);

    const std::size_t nx = static_cast<std::size_t>(h.dim[1]);
    const std::size_t ny = static_cast<std::size_t>(h.dim[2]);
    const std::size_t nz = h.dim[0] == 3 ? static_cast<std::size_t>(h.dim[3]) : 1;
    if (nx < 1 || ny < 1 || nz < 1) throw Error(Errc::data, "non-positive NIfTI extent: " + path);
    const std::size_t nvox = nx * ny * nz;

    std::size_t elem_size = 0;
    switch (h.datatype) {
        case nifti_dt::int16: elem_size = 2; break;
        case nifti_dt::float32: elem_size = 4; break;
        case nifti_dt::float64: elem_size = 8; break;
        default:
            throw Error(Errc::data,
                        "unsupported NIfTI datatype code " + std::to_string(h.datatype) + ": " + path);
    }

    in.seekg(static_cast<std::streamoff>(h.vox_offset), std::ios::beg);
    std::vector<char> raw(nvox * elem_size);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw Error(Errc::data, "truncated NIfTI data section: " + path);

    const bool rescale = h.scl_slope != 0.0f;
    const float slope = rescale ? h.scl_slope : 1.0f;
    const float inter = rescale ? h.scl_inter : 0.0f;

    Tensor data(Shape{nz, ny, nx});
    // file order is x fastest, matching the row-major [z][y][x] layout
    for (std::size_t i = 0; i < nvox; ++i) {
        float v = 0.0f;
        switch (h.datatype) {
            case nifti_dt::int16: {
                std::int16_t s;
                std::memcpy(&s, raw.data() + i * 2, 2);
                if (swapped) detail::bswap(s);
                v = static_cast<float>(s);
                break;
            }
            case nifti_dt::float32: {
                std::memcpy(&v, raw.data() + i * 4, 4);
                if (swapped) detail::bswap(v);
                break;
            }
            case nifti_dt::float64: {
                double d;
                std::memcpy(&d, raw.data() + i * 8, 8);
                if (swapped) detail::bswap(d);
                v = static_cast<float>(d);
                break;
            }
        }
        data[i] = v * slope + inter;
        if (!std::isfinite(data[i]))
            throw Error(Errc::data, "non-finite intensity after rescale in NIfTI file: " + path);
    }

    Volume vol;
    vol.data = std::move(data);
    vol.spacing_mm = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};
    return {h, std::move(vol)};
}

/// Writes a single-file .nii: float32, scl_slope=1, scl_inter=0,
/// vox_offset=352, little-endian. read_nifti(write_nifti(v)) is bit-exact.
inline void write_nifti(const Volume& vol, const std::string& path) {
    if (vol.data.rank() != 3) throw Error(Errc::config, "write_nifti: volume tensor must be rank 3");

    NiftiHeader h;
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(vol.width());
    h.dim[2] = static_cast<std::int16_t>(vol.height());
    h.dim[3] = static_cast<std::int16_t>(vol.depth());
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = nifti_dt::float32;
    h.bitpix = 32;
    h.pixdim[0] = 1.0f;
    h.pixdim[1] = vol.spacing_mm[0];
    h.pixdim[2] = vol.spacing_mm[1];
    h.pixdim[3] = vol.spacing_mm[2];
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.sform_code = 1;
    h.srow_x[0] = vol.spacing_mm[0];
    h.srow_y[1] = vol.spacing_mm[1];
    h.srow_z[2] = vol.spacing_mm[2];

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::data, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(&h), sizeof(h));
    const char pad[4] = {};  // 348 -> 352
    out.write(pad, 4);
    out.write(reinterpret_cast<const char*>(vol.data.data()),
              static_cast<std::streamsize>(vol.data.count() * sizeof(float)));
    if (!out) throw Error(Errc::data, "write failure: " + path);
}

}  // namespace voxbag

#endif  // VOXBAG_NIFTI_HPP_
