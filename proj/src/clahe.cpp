#include "onnseg/clahe.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace onnseg {

Image2D clahe(const Image2D& img, const ClaheParams& p) {
    if (p.tiles_x < 1 || p.tiles_y < 1)
        throw ConfigError("clahe: tile grid must be at least 1x1");
    if (p.clip_limit <= 0.0)
        throw ConfigError("clahe: clip_limit must be positive");
    if (p.bins < 2)
        throw ConfigError("clahe: need at least 2 histogram bins");
    if (img.h < p.tiles_y || img.w < p.tiles_x)
        throw ConfigError("clahe: image " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                          " smaller than tile grid " + std::to_string(p.tiles_y) + "x" +
                          std::to_string(p.tiles_x));

    const int tx = p.tiles_x, ty = p.tiles_y, bins = p.bins;
    auto bin_of = [&](double v) {
        v = std::clamp(v, 0.0, 1.0);
        return std::min(bins - 1, static_cast<int>(v * bins));
    };
    auto y_lo = [&](int j) { return static_cast<int>(static_cast<std::int64_t>(j) * img.h / ty); };
    auto x_lo = [&](int i) { return static_cast<int>(static_cast<std::int64_t>(i) * img.w / tx); };

    // per-tile clipped-CDF mappings, bin -> [0,1]
    std::vector<std::vector<double>> mapping(static_cast<std::size_t>(tx) * ty);
    std::vector<double> center_y(ty), center_x(tx);
    for (int j = 0; j < ty; ++j) {
        const int yl = y_lo(j), yh = y_lo(j + 1);
        center_y[j] = 0.5 * (yl + yh - 1);
        for (int i = 0; i < tx; ++i) {
            const int xl = x_lo(i), xh = x_lo(i + 1);
            center_x[i] = 0.5 * (xl + xh - 1);
            const std::int64_t tile_pixels =
                static_cast<std::int64_t>(yh - yl) * (xh - xl);

            std::vector<std::int64_t> hist(static_cast<std::size_t>(bins), 0);
            for (int y = yl; y < yh; ++y)
                for (int x = xl; x < xh; ++x)
                    ++hist[static_cast<std::size_t>(bin_of(img.at(y, x)))];

            const std::int64_t limit = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(p.clip_limit * static_cast<double>(tile_pixels) /
                                             bins));
            std::int64_t excess = 0;
            for (auto& hcount : hist)
                if (hcount > limit) {
                    excess += hcount - limit;
                    hcount = limit;
                }
            const std::int64_t per_bin = excess / bins;
            const std::int64_t leftover = excess % bins;
            for (int b = 0; b < bins; ++b)
                hist[static_cast<std::size_t>(b)] += per_bin + (b < leftover ? 1 : 0);

            auto& map = mapping[static_cast<std::size_t>(j) * tx + i];
            map.resize(static_cast<std::size_t>(bins));
            std::int64_t cdf = 0;
            for (int b = 0; b < bins; ++b) {
                cdf += hist[static_cast<std::size_t>(b)];
                map[static_cast<std::size_t>(b)] =
                    static_cast<double>(cdf) / static_cast<double>(tile_pixels);
            }
        }
    }

    Image2D out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        // neighboring tile rows and vertical weight
        int j0 = ty - 1;
        while (j0 > 0 && center_y[j0] > y) --j0;
        int j1 = std::min(j0 + 1, ty - 1);
        double wy = 0.0;
        if (j1 != j0 && center_y[j1] != center_y[j0])
            wy = std::clamp((y - center_y[j0]) / (center_y[j1] - center_y[j0]), 0.0, 1.0);
        for (int x = 0; x < img.w; ++x) {
            int i0 = tx - 1;
            while (i0 > 0 && center_x[i0] > x) --i0;
            int i1 = std::min(i0 + 1, tx - 1);
            double wx = 0.0;
            if (i1 != i0 && center_x[i1] != center_x[i0])
                wx = std::clamp((x - center_x[i0]) / (center_x[i1] - center_x[i0]), 0.0, 1.0);

            const int b = bin_of(img.at(y, x));
            const double m00 = mapping[static_cast<std::size_t>(j0) * tx + i0][b];
            const double m01 = mapping[static_cast<std::size_t>(j0) * tx + i1][b];
            const double m10 = mapping[static_cast<std::size_t>(j1) * tx + i0][b];
            const double m11 = mapping[static_cast<std::size_t>(j1) * tx + i1][b];
            out.at(y, x) = (1.0 - wy) * ((1.0 - wx) * m00 + wx * m01) +
                           wy * ((1.0 - wx) * m10 + wx * m11);
        }
    }
    return out;
}

} // namespace onnseg
