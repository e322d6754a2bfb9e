#include "onnseg/nifti.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace onnseg {

namespace {

std::uint16_t bswap16(std::uint16_t v) { return static_cast<std::uint16_t>((v >> 8) | (v << 8)); }
std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}
std::uint64_t bswap64(std::uint64_t v) {
    return (static_cast<std::uint64_t>(bswap32(static_cast<std::uint32_t>(v))) << 32) |
           bswap32(static_cast<std::uint32_t>(v >> 32));
}

// little-endian codec; the `swap` flag handles big-endian files
struct Reader {
    const std::uint8_t* p;
    bool swap;

    std::int16_t i16(std::size_t off) const {
        std::uint16_t v;
        std::memcpy(&v, p + off, 2);
        if (swap) v = bswap16(v);
        return static_cast<std::int16_t>(v);
    }
    std::int32_t i32(std::size_t off) const {
        std::uint32_t v;
        std::memcpy(&v, p + off, 4);
        if (swap) v = bswap32(v);
        return static_cast<std::int32_t>(v);
    }
    float f32(std::size_t off) const {
        std::uint32_t v;
        std::memcpy(&v, p + off, 4);
        if (swap) v = bswap32(v);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    char ch(std::size_t off) const { return static_cast<char>(p[off]); }
};

struct Writer {
    std::uint8_t* p;

    void i16(std::size_t off, std::int16_t v) { std::memcpy(p + off, &v, 2); }
    void i32(std::size_t off, std::int32_t v) { std::memcpy(p + off, &v, 4); }
    void f32(std::size_t off, float v) { std::memcpy(p + off, &v, 4); }
    void ch(std::size_t off, char v) { p[off] = static_cast<std::uint8_t>(v); }
};

int bitpix_for(std::int16_t datatype) {
    switch (datatype) {
    case NIFTI_UINT8: return 8;
    case NIFTI_INT16: return 16;
    case NIFTI_FLOAT32: return 32;
    case NIFTI_FLOAT64: return 64;
    default: return -1;
    }
}

} // namespace

NiftiHeader NiftiHeader::make(int x, int y, int z, std::int16_t dtype, float sx, float sy,
                              float sz) {
    NiftiHeader h;
    h.dim = {3, static_cast<std::int16_t>(x), static_cast<std::int16_t>(y),
             static_cast<std::int16_t>(z), 1, 1, 1, 1};
    h.pixdim = {1.0f, sx, sy, sz, 0, 0, 0, 0};
    h.datatype = dtype;
    h.bitpix = static_cast<std::int16_t>(bitpix_for(dtype));
    return h;
}

std::int64_t NiftiHeader::voxel_count() const {
    std::int64_t n = 1;
    for (int i = 1; i <= dim[0]; ++i) n *= dim[i];
    return n;
}

void NiftiHeader::validate() const {
    if (sizeof_hdr != 348)
        throw ValidationError("nifti header: sizeof_hdr is " + std::to_string(sizeof_hdr) +
                              ", must be 348");
    const bool n1 = std::memcmp(magic.data(), "n+1", 4) == 0;
    const bool ni1 = std::memcmp(magic.data(), "ni1", 4) == 0;
    if (!n1 && !ni1)
        throw ValidationError("nifti header: magic must be \"n+1\\0\" or \"ni1\\0\"");
    if (dim[0] < 1 || dim[0] > 7)
        throw ValidationError("nifti header: dim[0] is " + std::to_string(dim[0]) +
                              ", must be in 1..7");
    for (int i = 1; i <= dim[0]; ++i)
        if (dim[i] < 1)
            throw ValidationError("nifti header: dim[" + std::to_string(i) + "] is " +
                                  std::to_string(dim[i]) + ", must be >= 1");
    const int bp = bitpix_for(datatype);
    if (bp < 0)
        throw ValidationError("nifti header: unsupported datatype code " +
                              std::to_string(datatype));
    if (bitpix != bp)
        throw ValidationError("nifti header: bitpix " + std::to_string(bitpix) +
                              " inconsistent with datatype " + std::to_string(datatype) +
                              " (expected " + std::to_string(bp) + ")");
    if (n1 && vox_offset < 352.0f)
        throw ValidationError("nifti header: single-file vox_offset " +
                              std::to_string(vox_offset) + " is below 352");
}

NiftiHeader parse_header(const std::uint8_t* bytes, std::size_t len) {
    if (len < kNiftiHeaderSize)
        throw FormatError("nifti header: need 348 bytes, got " + std::to_string(len));
    std::int32_t raw;
    std::memcpy(&raw, bytes, 4);
    bool swap;
    if (raw == 348)
        swap = false;
    else if (static_cast<std::int32_t>(bswap32(static_cast<std::uint32_t>(raw))) == 348)
        swap = true;
    else
        throw FormatError("not a NIfTI-1 header: sizeof_hdr reads 348 in neither byte order");

    Reader r{bytes, swap};
    NiftiHeader h;
    h.sizeof_hdr = r.i32(0);
    for (int i = 0; i < 10; ++i) h.data_type[i] = r.ch(4 + i);
    for (int i = 0; i < 18; ++i) h.db_name[i] = r.ch(14 + i);
    h.extents = r.i32(32);
    h.session_error = r.i16(36);
    h.regular = r.ch(38);
    h.dim_info = r.ch(39);
    for (int i = 0; i < 8; ++i) h.dim[i] = r.i16(40 + 2 * i);
    h.intent_p1 = r.f32(56);
    h.intent_p2 = r.f32(60);
    h.intent_p3 = r.f32(64);
    h.intent_code = r.i16(68);
    h.datatype = r.i16(70);
    h.bitpix = r.i16(72);
    h.slice_start = r.i16(74);
    for (int i = 0; i < 8; ++i) h.pixdim[i] = r.f32(76 + 4 * i);
    h.vox_offset = r.f32(108);
    h.scl_slope = r.f32(112);
    h.scl_inter = r.f32(116);
    h.slice_end = r.i16(120);
    h.slice_code = r.ch(122);
    h.xyzt_units = r.ch(123);
    h.cal_max = r.f32(124);
    h.cal_min = r.f32(128);
    h.slice_duration = r.f32(132);
    h.toffset = r.f32(136);
    h.glmax = r.i32(140);
    h.glmin = r.i32(144);
    for (int i = 0; i < 80; ++i) h.descrip[i] = r.ch(148 + i);
    for (int i = 0; i < 24; ++i) h.aux_file[i] = r.ch(228 + i);
    h.qform_code = r.i16(252);
    h.sform_code = r.i16(254);
    h.quatern_b = r.f32(256);
    h.quatern_c = r.f32(260);
    h.quatern_d = r.f32(264);
    h.qoffset_x = r.f32(268);
    h.qoffset_y = r.f32(272);
    h.qoffset_z = r.f32(276);
    for (int i = 0; i < 4; ++i) h.srow_x[i] = r.f32(280 + 4 * i);
    for (int i = 0; i < 4; ++i) h.srow_y[i] = r.f32(296 + 4 * i);
    for (int i = 0; i < 4; ++i) h.srow_z[i] = r.f32(312 + 4 * i);
    for (int i = 0; i < 16; ++i) h.intent_name[i] = r.ch(328 + i);
    for (int i = 0; i < 4; ++i) h.magic[i] = r.ch(344 + i);

    const bool n1 = std::memcmp(h.magic.data(), "n+1", 4) == 0;
    const bool ni1 = std::memcmp(h.magic.data(), "ni1", 4) == 0;
    if (!n1 && !ni1)
        throw FormatError("nifti header: bad magic \"" +
                          std::string(h.magic.data(), h.magic.data() + 3) + "\"");
    if (bitpix_for(h.datatype) < 0)
        throw FormatError("nifti header: unsupported datatype code " +
                          std::to_string(h.datatype));
    return h;
}

NiftiHeader parse_header(const std::vector<std::uint8_t>& bytes) {
    return parse_header(bytes.data(), bytes.size());
}

std::array<std::uint8_t, kNiftiHeaderSize> write_header(const NiftiHeader& h) {
    h.validate();
    std::array<std::uint8_t, kNiftiHeaderSize> out{};
    Writer w{out.data()};
    w.i32(0, h.sizeof_hdr);
    for (int i = 0; i < 10; ++i) w.ch(4 + i, h.data_type[i]);
    for (int i = 0; i < 18; ++i) w.ch(14 + i, h.db_name[i]);
    w.i32(32, h.extents);
    w.i16(36, h.session_error);
    w.ch(38, h.regular);
    w.ch(39, h.dim_info);
    for (int i = 0; i < 8; ++i) w.i16(40 + 2 * i, h.dim[i]);
    w.f32(56, h.intent_p1);
    w.f32(60, h.intent_p2);
    w.f32(64, h.intent_p3);
    w.i16(68, h.intent_code);
    w.i16(70, h.datatype);
    w.i16(72, h.bitpix);
    w.i16(74, h.slice_start);
    for (int i = 0; i < 8; ++i) w.f32(76 + 4 * i, h.pixdim[i]);
    w.f32(108, h.vox_offset);
    w.f32(112, h.scl_slope);
    w.f32(116, h.scl_inter);
    w.i16(120, h.slice_end);
    w.ch(122, h.slice_code);
    w.ch(123, h.xyzt_units);
    w.f32(124, h.cal_max);
    w.f32(128, h.cal_min);
    w.f32(132, h.slice_duration);
    w.f32(136, h.toffset);
    w.i32(140, h.glmax);
    w.i32(144, h.glmin);
    for (int i = 0; i < 80; ++i) w.ch(148 + i, h.descrip[i]);
    for (int i = 0; i < 24; ++i) w.ch(228 + i, h.aux_file[i]);
    w.i16(252, h.qform_code);
    w.i16(254, h.sform_code);
    w.f32(256, h.quatern_b);
    w.f32(260, h.quatern_c);
    w.f32(264, h.quatern_d);
    w.f32(268, h.qoffset_x);
    w.f32(272, h.qoffset_y);
    w.f32(276, h.qoffset_z);
    for (int i = 0; i < 4; ++i) w.f32(280 + 4 * i, h.srow_x[i]);
    for (int i = 0; i < 4; ++i) w.f32(296 + 4 * i, h.srow_y[i]);
    for (int i = 0; i < 4; ++i) w.f32(312 + 4 * i, h.srow_z[i]);
    for (int i = 0; i < 16; ++i) w.ch(328 + i, h.intent_name[i]);
    for (int i = 0; i < 4; ++i) w.ch(344 + i, h.magic[i]);
    return out;
}

void Volume::update_range() {
    if (voxels.empty()) {
        vmin = vmax = 0;
        return;
    }
    const auto [lo, hi] = std::minmax_element(voxels.begin(), voxels.end());
    vmin = *lo;
    vmax = *hi;
}

namespace {

std::vector<std::uint8_t> read_all_maybe_gz(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb"); // transparently handles plain files too
    if (!f)
        throw IoError("cannot open " + path);
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int n;
    while ((n = gzread(f, buf, sizeof buf)) > 0)
        out.insert(out.end(), buf, buf + n);
    const bool bad = n < 0;
    gzclose(f);
    if (bad)
        throw FormatError("gzip decompression failed for " + path);
    return out;
}

} // namespace

Volume read_volume(const std::string& path) {
    const auto bytes = read_all_maybe_gz(path);
    const NiftiHeader h = parse_header(bytes.data(), bytes.size());
    if (std::memcmp(h.magic.data(), "n+1", 4) != 0)
        throw FormatError("read_volume: two-file (.hdr/.img) NIfTI is not supported: " + path);
    for (int i = 4; i <= h.dim[0]; ++i)
        if (h.dim[i] > 1)
            throw FormatError("read_volume: only 3-D volumes supported, dim[" +
                              std::to_string(i) + "]=" + std::to_string(h.dim[i]));

    // re-detect byte order for the payload
    std::int32_t raw;
    std::memcpy(&raw, bytes.data(), 4);
    const bool swap = raw != 348;

    Volume v;
    v.nx = h.nx();
    v.ny = h.dim[0] >= 2 ? h.dim[2] : 1;
    v.nz = h.dim[0] >= 3 ? h.dim[3] : 1;
    v.sx = h.pixdim[1];
    v.sy = h.dim[0] >= 2 ? h.pixdim[2] : 1.0f;
    v.sz = h.dim[0] >= 3 ? h.pixdim[3] : 1.0f;

    const std::int64_t nvox = h.voxel_count();
    const std::size_t elem = static_cast<std::size_t>(h.bitpix) / 8;
    const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
    const std::size_t need = offset + static_cast<std::size_t>(nvox) * elem;
    if (bytes.size() < need)
        throw FormatError("read_volume: truncated data section in " + path + ": expected " +
                          std::to_string(need) + " bytes, got " + std::to_string(bytes.size()));

    v.voxels.resize(static_cast<std::size_t>(nvox));
    const std::uint8_t* p = bytes.data() + offset;
    for (std::int64_t i = 0; i < nvox; ++i) {
        double val = 0;
        switch (h.datatype) {
        case NIFTI_UINT8:
            val = p[i];
            break;
        case NIFTI_INT16: {
            std::uint16_t u;
            std::memcpy(&u, p + 2 * i, 2);
            if (swap) u = bswap16(u);
            val = static_cast<std::int16_t>(u);
            break;
        }
        case NIFTI_FLOAT32: {
            std::uint32_t u;
            std::memcpy(&u, p + 4 * i, 4);
            if (swap) u = bswap32(u);
            float f;
            std::memcpy(&f, &u, 4);
            val = f;
            break;
        }
        case NIFTI_FLOAT64: {
            std::uint64_t u;
            std::memcpy(&u, p + 8 * i, 8);
            if (swap) u = bswap64(u);
            double d;
            std::memcpy(&d, &u, 8);
            val = d;
            break;
        }
        default:
            throw FormatError("read_volume: unsupported datatype code " +
                              std::to_string(h.datatype));
        }
        if (h.scl_slope != 0.0f)
            val = val * h.scl_slope + h.scl_inter;
        v.voxels[static_cast<std::size_t>(i)] = val;
    }
    v.update_range();
    return v;
}

void write_volume(const std::string& path, const Volume& v, std::int16_t datatype) {
    NiftiHeader h = NiftiHeader::make(v.nx, v.ny, v.nz, datatype, static_cast<float>(v.sx),
                                      static_cast<float>(v.sy), static_cast<float>(v.sz));
    const auto hdr = write_header(h);
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(hdr.data()), hdr.size());
    const char pad[4] = {0, 0, 0, 0}; // extension flag; data starts at vox_offset 352
    f.write(pad, 4);
    for (double d : v.voxels) {
        switch (datatype) {
        case NIFTI_UINT8: {
            const std::uint8_t b = static_cast<std::uint8_t>(d);
            f.write(reinterpret_cast<const char*>(&b), 1);
            break;
        }
        case NIFTI_INT16: {
            const std::int16_t s = static_cast<std::int16_t>(d);
            f.write(reinterpret_cast<const char*>(&s), 2);
            break;
        }
        case NIFTI_FLOAT32: {
            const float fl = static_cast<float>(d);
            f.write(reinterpret_cast<const char*>(&fl), 4);
            break;
        }
        case NIFTI_FLOAT64:
            f.write(reinterpret_cast<const char*>(&d), 8);
            break;
        default:
            throw ValidationError("write_volume: unsupported datatype code " +
                                  std::to_string(datatype));
        }
    }
    if (!f)
        throw IoError("short write to " + path);
}

Image2D slice_axial(const Volume& v, int z) {
    if (z < 0 || z >= v.nz)
        throw IndexError("slice_axial: z=" + std::to_string(z) + " out of range [0," +
                         std::to_string(v.nz) + ")");
    Image2D img(v.ny, v.nx);
    for (int y = 0; y < v.ny; ++y)
        for (int x = 0; x < v.nx; ++x)
            img.at(y, x) = v.at(x, y, z);
    return img;
}

} // namespace onnseg
