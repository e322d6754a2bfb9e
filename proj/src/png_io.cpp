#include "onnseg/png_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace onnseg {

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(4 + data.size()));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

GrayImage quantize_gray(const Image2D& img, double lo, double hi) {
    if (lo >= hi)
        throw ValidationError("quantize_gray: invalid range lo=" + std::to_string(lo) +
                              " >= hi=" + std::to_string(hi));
    GrayImage out;
    out.h = img.h;
    out.w = img.w;
    out.pixels.resize(img.data.size());
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        double v = (img.data[i] - lo) * scale;
        if (v < 0.0) v = 0.0;
        if (v > 255.0) v = 255.0;
        // llround rounds halves away from zero, so (lo+hi)/2 maps to 128
        out.pixels[i] = static_cast<std::uint8_t>(std::llround(v));
    }
    return out;
}

void write_png_gray(const GrayImage& img, const std::string& path) {
    // scanlines with filter byte 0 (None)
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(img.h) * (img.w + 1));
    for (int y = 0; y < img.h; ++y) {
        raw.push_back(0);
        raw.insert(raw.end(), img.pixels.begin() + static_cast<std::size_t>(y) * img.w,
                   img.pixels.begin() + static_cast<std::size_t>(y + 1) * img.w);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png: zlib compression failed");
    comp.resize(comp_len);

    std::vector<std::uint8_t> file(kSignature, kSignature + 8);
    std::vector<std::uint8_t> ihdr;
    put_u32be(ihdr, static_cast<std::uint32_t>(img.w));
    put_u32be(ihdr, static_cast<std::uint32_t>(img.h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // color type: grayscale
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // non-interlaced
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", comp);
    append_chunk(file, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot write " + path);
    f.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!f)
        throw IoError("short write to " + path);
}

void write_png_gray(const Image2D& img, const std::string& path, double lo, double hi) {
    write_png_gray(quantize_gray(img, lo, hi), path);
}

GrayImage read_png_gray(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw FormatError("not a PNG file: " + path);

    GrayImage img;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    bool saw_ihdr = false;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = get_u32be(&bytes[pos]);
        if (pos + 12 + len > bytes.size())
            throw FormatError("png: truncated chunk in " + path);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* data = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            img.w = static_cast<int>(get_u32be(data));
            img.h = static_cast<int>(get_u32be(data + 4));
            if (data[8] != 8 || data[9] != 0 || data[12] != 0)
                throw FormatError("png: only 8-bit non-interlaced grayscale is supported");
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || idat.empty())
        throw FormatError("png: missing IHDR/IDAT in " + path);

    const std::size_t stride = static_cast<std::size_t>(img.w) + 1;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.h) * stride);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw FormatError("png: inflate failed for " + path);

    img.pixels.resize(static_cast<std::size_t>(img.h) * img.w);
    std::vector<std::uint8_t> prev(static_cast<std::size_t>(img.w), 0);
    for (int y = 0; y < img.h; ++y) {
        const std::uint8_t filter = raw[static_cast<std::size_t>(y) * stride];
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * stride + 1];
        std::uint8_t* dst = &img.pixels[static_cast<std::size_t>(y) * img.w];
        for (int x = 0; x < img.w; ++x) {
            const int a = x > 0 ? dst[x - 1] : 0;
            const int b = prev[x];
            const int c = x > 0 ? prev[x - 1] : 0;
            int v = src[x];
            switch (filter) {
            case 0: break;
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: v += paeth(a, b, c); break;
            default: throw FormatError("png: unknown filter " + std::to_string(filter));
            }
            dst[x] = static_cast<std::uint8_t>(v & 0xff);
        }
        std::memcpy(prev.data(), dst, static_cast<std::size_t>(img.w));
    }
    return img;
}

} // namespace onnseg
