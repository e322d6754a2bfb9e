#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "onnseg/clahe.hpp"
#include "onnseg/image.hpp"
#include "onnseg/png_io.hpp"
#include "onnseg/rng.hpp"

using namespace onnseg;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
    auto d = fs::temp_directory_path() / "onnseg_image_tests";
    fs::create_directories(d);
    return d;
}

// independent bilinear oracle: neighbor cell from the unclamped floor, then
// both indices clamped to the image (align-corners-false edge handling)
double bilinear_oracle(const Image2D& img, double sy, double sx) {
    auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    const int fy0 = static_cast<int>(std::floor(sy));
    const int fx0 = static_cast<int>(std::floor(sx));
    const int y0 = clampi(fy0, img.h - 1);
    const int y1 = clampi(fy0 + 1, img.h - 1);
    const int x0 = clampi(fx0, img.w - 1);
    const int x1 = clampi(fx0 + 1, img.w - 1);
    const double fy = sy - fy0;
    const double fx = sx - fx0;
    return (1 - fy) * ((1 - fx) * img.at(y0, x0) + fx * img.at(y0, x1)) +
           fy * ((1 - fx) * img.at(y1, x0) + fx * img.at(y1, x1));
}

} // namespace

TEST_CASE("resize") {
    SUBCASE("256x256 input is a no-op in both modes") {
        Rng rng(1);
        Image2D img(256, 256);
        for (double& v : img.data) v = rng.uniform();
        CHECK(resize(img, 256, 256, ResizeMode::Bilinear).data == img.data);
        CHECK(resize(img, 256, 256, ResizeMode::Nearest).data == img.data);
    }
    SUBCASE("nearest keeps a mask binary") {
        Rng rng(2);
        Image2D mask(13, 17);
        for (double& v : mask.data) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
        auto up = resize(mask, 256, 256, ResizeMode::Nearest);
        for (double v : up.data) CHECK((v == 0.0 || v == 1.0));
    }
    SUBCASE("2x2 checkerboard to 4x4 matches the interpolation oracle") {
        Image2D cb(2, 2);
        cb.at(0, 0) = 0;
        cb.at(0, 1) = 1;
        cb.at(1, 0) = 1;
        cb.at(1, 1) = 0;
        auto up = resize(cb, 4, 4, ResizeMode::Bilinear);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                const double sy = (y + 0.5) * 2.0 / 4.0 - 0.5;
                const double sx = (x + 0.5) * 2.0 / 4.0 - 0.5;
                CHECK(up.at(y, x) == doctest::Approx(bilinear_oracle(cb, sy, sx)).epsilon(1e-12));
            }
    }
    SUBCASE("random resizes match the oracle elementwise") {
        Rng rng(3);
        Image2D img(7, 5);
        for (double& v : img.data) v = rng.uniform();
        auto out = resize(img, 11, 9, ResizeMode::Bilinear);
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 9; ++x) {
                const double sy = (y + 0.5) * 7.0 / 11.0 - 0.5;
                const double sx = (x + 0.5) * 5.0 / 9.0 - 0.5;
                CHECK(out.at(y, x) == doctest::Approx(bilinear_oracle(img, sy, sx)).epsilon(1e-12));
            }
    }
}

TEST_CASE("normalize_minmax") {
    Image2D img(1, 2);
    img.at(0, 0) = 2;
    img.at(0, 1) = 4;
    auto n = normalize_minmax(img);
    CHECK(n.at(0, 0) == 0.0);
    CHECK(n.at(0, 1) == 1.0);

    Image2D c(3, 3, 5.0);
    for (double v : normalize_minmax(c).data) CHECK(v == 0.0);

    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        Image2D r(6, 6);
        for (double& v : r.data) v = rng.uniform(-10, 10);
        auto nn = normalize_minmax(r);
        const auto [lo, hi] = std::minmax_element(nn.data.begin(), nn.data.end());
        CHECK(*lo == 0.0);
        CHECK(*hi == 1.0);
    }
}

TEST_CASE("png quantization rules") {
    SUBCASE("constant image at lo maps to zero bytes") {
        Image2D img(4, 4, 0.25);
        auto g = quantize_gray(img, 0.25, 1.0);
        for (auto b : g.pixels) CHECK(b == 0);
    }
    SUBCASE("midpoint rounds half away from zero to 128") {
        Image2D img(1, 1, 0.5);
        CHECK(quantize_gray(img, 0.0, 1.0).pixels[0] == 128);
    }
    SUBCASE("values clamp to the range") {
        Image2D img(1, 2);
        img.at(0, 0) = -3.0;
        img.at(0, 1) = 7.0;
        auto g = quantize_gray(img, 0.0, 1.0);
        CHECK(g.pixels[0] == 0);
        CHECK(g.pixels[1] == 255);
    }
    SUBCASE("lo >= hi is rejected") {
        Image2D img(1, 1, 0.0);
        CHECK_THROWS_AS(quantize_gray(img, 1.0, 1.0), ValidationError);
    }
}

TEST_CASE("png round trip and determinism") {
    Rng rng(5);
    Image2D img(19, 23);
    for (double& v : img.data) v = rng.uniform();
    const auto p1 = (tmpdir() / "a.png").string();
    const auto p2 = (tmpdir() / "b.png").string();
    write_png_gray(img, p1, 0.0, 1.0);
    write_png_gray(img, p2, 0.0, 1.0);

    auto read_bytes = [](const std::string& p) {
        std::ifstream f(p, std::ios::binary);
        return std::vector<char>((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
    };
    CHECK(read_bytes(p1) == read_bytes(p2));

    auto expect = quantize_gray(img, 0.0, 1.0);
    auto got = read_png_gray(p1);
    CHECK(got.h == expect.h);
    CHECK(got.w == expect.w);
    CHECK(got.pixels == expect.pixels);
}

TEST_CASE("clahe") {
    Rng rng(6);
    Image2D img(64, 64);
    for (double& v : img.data) v = rng.uniform();

    SUBCASE("contract: shape preserved, output in [0,1]") {
        auto out = clahe(img);
        CHECK(out.h == img.h);
        CHECK(out.w == img.w);
        for (double v : out.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    SUBCASE("bitwise deterministic") {
        CHECK(clahe(img).data == clahe(img).data);
    }
    SUBCASE("low-contrast ramp gains RMS contrast") {
        Image2D ramp(256, 256);
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x)
                ramp.at(y, x) = 0.45 + 0.10 * (x + 256.0 * y) / (256.0 * 256.0);
        auto out = clahe(ramp);
        CHECK(rms_contrast(out) > rms_contrast(ramp));
    }
    SUBCASE("image smaller than the tile grid is rejected") {
        Image2D tiny(4, 4, 0.5);
        CHECK_THROWS_AS(clahe(tiny), ConfigError);
    }
    SUBCASE("bad parameters are rejected") {
        CHECK_THROWS_AS(clahe(img, {0.0, 8, 8, 256}), ConfigError);
        CHECK_THROWS_AS(clahe(img, {2.0, 0, 8, 256}), ConfigError);
        CHECK_THROWS_AS(clahe(img, {2.0, 8, 8, 1}), ConfigError);
    }
}
