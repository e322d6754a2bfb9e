#pragma once

#include <cstdint>
#include <vector>

#include "onnseg/error.hpp"

namespace onnseg {

/// Row-major 2-D float image (y fastest varying last: data[y*w + x]).
struct Image2D {
    int h = 0, w = 0;
    std::vector<double> data;

    Image2D() = default;
    Image2D(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

enum class ResizeMode { Bilinear, Nearest };

/// Resample to (out_h, out_w). Bilinear uses the align-corners-false
/// convention (source coord of output o is (o+0.5)*in/out - 0.5, edges
/// clamped); nearest maps output o to floor(o*in/out), so integer upscales
/// replicate blocks and binary masks stay binary.
Image2D resize(const Image2D& img, int out_h, int out_w, ResizeMode mode);

/// (x - min)/(max - min); a constant image maps to all zeros.
Image2D normalize_minmax(const Image2D& img);

double spatial_mean(const Image2D& img);
/// Population standard deviation of pixel values (RMS contrast).
double rms_contrast(const Image2D& img);

} // namespace onnseg
