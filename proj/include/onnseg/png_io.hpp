#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "onnseg/image.hpp"

namespace onnseg {

/// 8-bit grayscale matrix as stored in a PNG.
struct GrayImage {
    int h = 0, w = 0;
    std::vector<std::uint8_t> pixels; // row-major

    std::uint8_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * w + x]; }
};

/// Quantize [lo,hi] -> [0,255] (clamped, rounding half away from zero).
/// Throws ValidationError when lo >= hi.
GrayImage quantize_gray(const Image2D& img, double lo, double hi);

/// Write an 8-bit grayscale non-interlaced PNG. Output bytes are
/// deterministic for identical input (fixed zlib level, filter 0 rows).
void write_png_gray(const Image2D& img, const std::string& path, double lo, double hi);
void write_png_gray(const GrayImage& img, const std::string& path);

/// Read back an 8-bit grayscale non-interlaced PNG (the subset this module
/// writes; all five scanline filters are understood).
GrayImage read_png_gray(const std::string& path);

} // namespace onnseg
