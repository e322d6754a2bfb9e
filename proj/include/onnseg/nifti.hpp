#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "onnseg/error.hpp"
#include "onnseg/image.hpp"

namespace onnseg {

// NIfTI-1 datatype codes (the supported subset).
enum NiftiDatatype : std::int16_t {
    NIFTI_UINT8 = 2,
    NIFTI_INT16 = 4,
    NIFTI_FLOAT32 = 16,
    NIFTI_FLOAT64 = 64,
};

/// Complete 348-byte NIfTI-1 header. Every field is kept so that
/// parse -> write round-trips byte-exactly. Multi-byte fields live at the
/// standard offsets (dim at 40, datatype at 70, bitpix at 72, pixdim at 76,
/// vox_offset at 108, magic at 344).
struct NiftiHeader {
    std::int32_t sizeof_hdr = 348;
    std::array<char, 10> data_type{};
    std::array<char, 18> db_name{};
    std::int32_t extents = 0;
    std::int16_t session_error = 0;
    char regular = 'r';
    char dim_info = 0;
    std::array<std::int16_t, 8> dim{};
    float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
    std::int16_t intent_code = 0;
    std::int16_t datatype = NIFTI_FLOAT32;
    std::int16_t bitpix = 32;
    std::int16_t slice_start = 0;
    std::array<float, 8> pixdim{};
    float vox_offset = 352.0f;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    std::int16_t slice_end = 0;
    char slice_code = 0;
    char xyzt_units = 0;
    float cal_max = 0, cal_min = 0;
    float slice_duration = 0;
    float toffset = 0;
    std::int32_t glmax = 0, glmin = 0;
    std::array<char, 80> descrip{};
    std::array<char, 24> aux_file{};
    std::int16_t qform_code = 0;
    std::int16_t sform_code = 0;
    float quatern_b = 0, quatern_c = 0, quatern_d = 0;
    float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
    std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
    std::array<char, 16> intent_name{};
    std::array<char, 4> magic{{'n', '+', '1', '\0'}};

    /// Minimal valid single-file header for a 3-D volume.
    static NiftiHeader make(int x, int y, int z, std::int16_t dtype,
                            float sx = 1.0f, float sy = 1.0f, float sz = 1.0f);

    int nx() const { return dim[1]; }
    int ny() const { return dim[2]; }
    int nz() const { return dim[0] >= 3 ? dim[3] : 1; }
    std::int64_t voxel_count() const;
    void validate() const; // throws ValidationError on invariant violation
};

constexpr std::size_t kNiftiHeaderSize = 348;

/// Decode a header, auto-detecting endianness from sizeof_hdr reading as 348
/// in either byte order. Throws FormatError for bad magic, unsupported
/// datatype codes, or a sizeof_hdr that is 348 in neither order.
NiftiHeader parse_header(const std::uint8_t* bytes, std::size_t len);
NiftiHeader parse_header(const std::vector<std::uint8_t>& bytes);

/// Serialize to the 348-byte little-endian layout; validates first.
std::array<std::uint8_t, kNiftiHeaderSize> write_header(const NiftiHeader& h);

/// 3-D scalar volume, voxels in x-fastest order: v[x + X*y + X*Y*z].
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    double sx = 1, sy = 1, sz = 1; // voxel spacing, mm
    std::vector<double> voxels;
    double vmin = 0, vmax = 0;

    double& at(int x, int y, int z) {
        return voxels[static_cast<std::size_t>(x) +
                      static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z)];
    }
    double at(int x, int y, int z) const {
        return voxels[static_cast<std::size_t>(x) +
                      static_cast<std::size_t>(nx) * (y + static_cast<std::size_t>(ny) * z)];
    }
    void update_range();
};

/// Read a .nii or .nii.gz volume. Voxels are scaled by scl_slope/scl_inter
/// when scl_slope != 0 (slope 0 passes raw values through, as the standard
/// prescribes). Supported datatypes: uint8, int16, float32, float64.
Volume read_volume(const std::string& path);

/// Write an uncompressed single-file .nii with the given datatype.
void write_volume(const std::string& path, const Volume& v,
                  std::int16_t datatype = NIFTI_FLOAT32);

/// image(y,x) = voxels[x + X*y + X*Y*z]; throws IndexError for z out of range.
Image2D slice_axial(const Volume& v, int z);

} // namespace onnseg
