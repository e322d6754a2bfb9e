#include "onnseg/image.hpp"

#include <algorithm>
#include <cmath>

namespace onnseg {

Image2D resize(const Image2D& img, int out_h, int out_w, ResizeMode mode) {
    if (img.h < 1 || img.w < 1)
        throw DimensionError("resize: empty input image");
    if (img.h == out_h && img.w == out_w)
        return img;
    Image2D out(out_h, out_w);
    if (mode == ResizeMode::Nearest) {
        for (int y = 0; y < out_h; ++y) {
            const int sy = std::min(img.h - 1,
                                    static_cast<int>(static_cast<std::int64_t>(y) * img.h / out_h));
            for (int x = 0; x < out_w; ++x) {
                const int sx = std::min(
                    img.w - 1, static_cast<int>(static_cast<std::int64_t>(x) * img.w / out_w));
                out.at(y, x) = img.at(sy, sx);
            }
        }
        return out;
    }
    const double scale_y = static_cast<double>(img.h) / out_h;
    const double scale_x = static_cast<double>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double sy = (y + 0.5) * scale_y - 0.5;
        int y0 = static_cast<int>(std::floor(sy));
        const double fy = sy - y0;
        int y1 = y0 + 1;
        y0 = std::clamp(y0, 0, img.h - 1);
        y1 = std::clamp(y1, 0, img.h - 1);
        for (int x = 0; x < out_w; ++x) {
            const double sx = (x + 0.5) * scale_x - 0.5;
            int x0 = static_cast<int>(std::floor(sx));
            const double fx = sx - x0;
            int x1 = x0 + 1;
            x0 = std::clamp(x0, 0, img.w - 1);
            x1 = std::clamp(x1, 0, img.w - 1);
            const double top = (1.0 - fx) * img.at(y0, x0) + fx * img.at(y0, x1);
            const double bot = (1.0 - fx) * img.at(y1, x0) + fx * img.at(y1, x1);
            out.at(y, x) = (1.0 - fy) * top + fy * bot;
        }
    }
    return out;
}

Image2D normalize_minmax(const Image2D& img) {
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    Image2D out(img.h, img.w);
    if (*hi == *lo)
        return out; // constant image -> zeros
    const double inv = 1.0 / (*hi - *lo);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = (img.data[i] - *lo) * inv;
    return out;
}

double spatial_mean(const Image2D& img) {
    double s = 0.0;
    for (double v : img.data) s += v;
    return s / static_cast<double>(img.data.size());
}

double rms_contrast(const Image2D& img) {
    const double m = spatial_mean(img);
    double s = 0.0;
    for (double v : img.data) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(img.data.size()));
}

} // namespace onnseg
