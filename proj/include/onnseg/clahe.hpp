#pragma once

#include "onnseg/image.hpp"

namespace onnseg {

struct ClaheParams {
    double clip_limit = 2.0; // multiple of the uniform bin count
    int tiles_x = 8;
    int tiles_y = 8;
    int bins = 256;
};

/// Contrast-limited adaptive histogram equalization on a [0,1] float image.
///
/// Per tile, a `bins`-level histogram is clipped at
/// clip_limit * tile_pixels / bins (at least 1) and the clipped mass is
/// redistributed uniformly, one count per bin first for the remainder. The
/// tile mapping is cdf[b] / tile_pixels and pixels are bilinearly
/// interpolated between the four neighboring tile mappings (clamped at the
/// borders). Output stays in [0,1] and is fully deterministic.
Image2D clahe(const Image2D& img, const ClaheParams& p = {});

} // namespace onnseg
