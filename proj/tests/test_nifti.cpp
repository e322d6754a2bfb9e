#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

#include "onnseg/nifti.hpp"
#include "onnseg/rng.hpp"

using namespace onnseg;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
    auto d = fs::temp_directory_path() / "onnseg_nifti_tests";
    fs::create_directories(d);
    return d;
}

// byte-swap every multi-byte field of a serialized header
std::vector<std::uint8_t> byteswap_header(const std::array<std::uint8_t, 348>& in) {
    std::vector<std::uint8_t> out(in.begin(), in.end());
    auto swap_at = [&](std::size_t off, std::size_t width) {
        std::reverse(out.begin() + static_cast<std::ptrdiff_t>(off),
                     out.begin() + static_cast<std::ptrdiff_t>(off + width));
    };
    swap_at(0, 4);   // sizeof_hdr
    swap_at(32, 4);  // extents
    swap_at(36, 2);  // session_error
    for (int i = 0; i < 8; ++i) swap_at(40 + 2 * i, 2);  // dim
    swap_at(56, 4);
    swap_at(60, 4);
    swap_at(64, 4);
    swap_at(68, 2);
    swap_at(70, 2);
    swap_at(72, 2);
    swap_at(74, 2);
    for (int i = 0; i < 8; ++i) swap_at(76 + 4 * i, 4);  // pixdim
    swap_at(108, 4);
    swap_at(112, 4);
    swap_at(116, 4);
    swap_at(120, 2);
    swap_at(124, 4);
    swap_at(128, 4);
    swap_at(132, 4);
    swap_at(136, 4);
    swap_at(140, 4);
    swap_at(144, 4);
    swap_at(252, 2);
    swap_at(254, 2);
    for (int i = 0; i < 6; ++i) swap_at(256 + 4 * i, 4); // quatern + qoffset
    for (int i = 0; i < 12; ++i) swap_at(280 + 4 * i, 4); // srow
    return out;
}

NiftiHeader random_header(Rng& rng) {
    auto h = NiftiHeader::make(rng.uniform_int(1, 64), rng.uniform_int(1, 64),
                               rng.uniform_int(1, 32),
                               std::array<std::int16_t, 4>{NIFTI_UINT8, NIFTI_INT16,
                                                           NIFTI_FLOAT32,
                                                           NIFTI_FLOAT64}[rng.next_below(4)]);
    h.pixdim[1] = static_cast<float>(rng.uniform(0.5, 4.0));
    h.pixdim[2] = static_cast<float>(rng.uniform(0.5, 4.0));
    h.pixdim[3] = static_cast<float>(rng.uniform(0.5, 4.0));
    h.scl_slope = rng.uniform() < 0.5 ? 0.0f : static_cast<float>(rng.uniform(0.5, 2.0));
    h.scl_inter = static_cast<float>(rng.uniform(-1.0, 1.0));
    h.cal_min = static_cast<float>(rng.uniform(0.0, 1.0));
    h.cal_max = h.cal_min + static_cast<float>(rng.uniform(0.0, 2.0));
    h.descrip[0] = 's';
    h.qform_code = static_cast<std::int16_t>(rng.next_below(4));
    h.sform_code = static_cast<std::int16_t>(rng.next_below(4));
    for (int i = 0; i < 4; ++i) h.srow_x[i] = static_cast<float>(rng.uniform(-2, 2));
    return h;
}

} // namespace

TEST_CASE("parse a synthetic header at the standard offsets") {
    auto h = NiftiHeader::make(4, 4, 2, NIFTI_FLOAT32);
    auto bytes = write_header(h);
    auto parsed = parse_header(bytes.data(), bytes.size());
    CHECK(parsed.nx() == 4);
    CHECK(parsed.ny() == 4);
    CHECK(parsed.nz() == 2);
    CHECK(parsed.datatype == NIFTI_FLOAT32);
    CHECK(parsed.bitpix == 32);
    CHECK(parsed.vox_offset == 352.0f);
}

TEST_CASE("byte-swapped header parses to identical values") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        auto h = random_header(rng);
        auto bytes = write_header(h);
        auto swapped = byteswap_header(bytes);
        auto a = parse_header(bytes.data(), bytes.size());
        auto b = parse_header(swapped);
        CHECK(write_header(a) == write_header(b));
    }
}

TEST_CASE("header rejections") {
    auto h = NiftiHeader::make(4, 4, 2, NIFTI_FLOAT32);
    auto bytes = write_header(h);

    SUBCASE("bad magic") {
        auto bad = bytes;
        std::memcpy(bad.data() + 344, "abcd", 4);
        CHECK_THROWS_AS(parse_header(bad.data(), bad.size()), FormatError);
    }
    SUBCASE("sizeof_hdr wrong in both byte orders") {
        auto bad = bytes;
        bad[0] = 0x11;
        bad[1] = 0x22;
        bad[2] = 0x33;
        bad[3] = 0x44;
        CHECK_THROWS_AS(parse_header(bad.data(), bad.size()), FormatError);
    }
    SUBCASE("unsupported datatype names the code") {
        auto bad = bytes;
        const std::int16_t dt = 1536; // DT_COMPLEX256
        std::memcpy(bad.data() + 70, &dt, 2);
        CHECK_THROWS_WITH_AS(parse_header(bad.data(), bad.size()), doctest::Contains("1536"),
                             FormatError);
    }
    SUBCASE("short buffer") {
        CHECK_THROWS_AS(parse_header(bytes.data(), 100), FormatError);
    }
    SUBCASE("dim[0]=0 fails validation on write") {
        auto h2 = h;
        h2.dim[0] = 0;
        CHECK_THROWS_AS(write_header(h2), ValidationError);
    }
    SUBCASE("inconsistent bitpix fails validation") {
        auto h2 = h;
        h2.bitpix = 16;
        CHECK_THROWS_AS(write_header(h2), ValidationError);
    }
    SUBCASE("single-file vox_offset below 352 fails validation") {
        auto h2 = h;
        h2.vox_offset = 200.0f;
        CHECK_THROWS_AS(write_header(h2), ValidationError);
    }
}

TEST_CASE("header round trip is byte exact for generated headers") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        auto h = random_header(rng);
        auto bytes = write_header(h);
        auto reparsed = parse_header(bytes.data(), bytes.size());
        CHECK(write_header(reparsed) == bytes);
    }
}

TEST_CASE("volume write/read round trip") {
    Volume v;
    v.nx = 4;
    v.ny = 4;
    v.nz = 2;
    v.voxels.resize(32);
    for (int i = 0; i < 32; ++i) v.voxels[static_cast<std::size_t>(i)] = i;
    v.update_range();

    const auto path = (tmpdir() / "consec.nii").string();
    write_volume(path, v, NIFTI_FLOAT32);
    auto r = read_volume(path);
    CHECK(r.nx == 4);
    CHECK(r.ny == 4);
    CHECK(r.nz == 2);
    for (int i = 0; i < 32; ++i) CHECK(r.voxels[static_cast<std::size_t>(i)] == i);
    CHECK(r.vmin == 0);
    CHECK(r.vmax == 31);

    SUBCASE("float64 preserves doubles exactly") {
        Volume d = v;
        d.voxels[5] = 0.1234567890123456;
        const auto p64 = (tmpdir() / "f64.nii").string();
        write_volume(p64, d, NIFTI_FLOAT64);
        auto rd = read_volume(p64);
        CHECK(rd.voxels[5] == 0.1234567890123456);
    }
    SUBCASE("axial slices") {
        auto img = slice_axial(r, 0);
        CHECK(img.h == 4);
        CHECK(img.w == 4);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) CHECK(img.at(y, x) == x + 4 * y);
        // restacking all slices reproduces the volume
        for (int z = 0; z < r.nz; ++z) {
            auto s = slice_axial(r, z);
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x) CHECK(s.at(y, x) == r.at(x, y, z));
        }
        CHECK_THROWS_AS(slice_axial(r, r.nz), IndexError);
        CHECK_THROWS_AS(slice_axial(r, -1), IndexError);
    }
}

TEST_CASE("scl_slope scaling is applied, slope 0 passes raw values") {
    auto h = NiftiHeader::make(1, 1, 1, NIFTI_FLOAT32);
    h.scl_slope = 2.0f;
    h.scl_inter = 1.0f;
    auto bytes = write_header(h);
    const auto path = (tmpdir() / "scl.nii").string();
    {
        std::ofstream f(path, std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()), 348);
        const char pad[4] = {0, 0, 0, 0};
        f.write(pad, 4);
        const float val = 3.0f;
        f.write(reinterpret_cast<const char*>(&val), 4);
    }
    CHECK(read_volume(path).voxels[0] == 7.0);

    h.scl_slope = 0.0f;
    bytes = write_header(h);
    {
        std::ofstream f(path, std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()), 348);
        const char pad[4] = {0, 0, 0, 0};
        f.write(pad, 4);
        const float val = 3.0f;
        f.write(reinterpret_cast<const char*>(&val), 4);
    }
    CHECK(read_volume(path).voxels[0] == 3.0);
}

TEST_CASE("truncated data section reports expected vs actual byte counts") {
    Volume v;
    v.nx = 4;
    v.ny = 4;
    v.nz = 2;
    v.voxels.assign(32, 1.0);
    const auto path = (tmpdir() / "trunc.nii").string();
    write_volume(path, v, NIFTI_FLOAT32);
    fs::resize_file(path, 360); // chop most of the payload
    CHECK_THROWS_WITH_AS(read_volume(path), doctest::Contains("expected"), FormatError);
}

TEST_CASE("gzip-compressed volumes are accepted") {
    Volume v;
    v.nx = 3;
    v.ny = 2;
    v.nz = 2;
    v.voxels.resize(12);
    for (int i = 0; i < 12; ++i) v.voxels[static_cast<std::size_t>(i)] = 10 + i;
    const auto plain = (tmpdir() / "z.nii").string();
    const auto gz = (tmpdir() / "z.nii.gz").string();
    write_volume(plain, v, NIFTI_FLOAT32);
    {
        std::ifstream in(plain, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        gzFile g = gzopen(gz.c_str(), "wb");
        REQUIRE(g != nullptr);
        gzwrite(g, bytes.data(), static_cast<unsigned>(bytes.size()));
        gzclose(g);
    }
    auto r = read_volume(gz);
    CHECK(r.nx == 3);
    for (int i = 0; i < 12; ++i) CHECK(r.voxels[static_cast<std::size_t>(i)] == 10 + i);
}
