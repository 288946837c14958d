#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flowvo/core.hpp"
#include "flowvo/image.hpp"

// Image pyramid for coarse-to-fine tracking: each level is the previous one
// smoothed with a 3x3 binomial kernel and resampled by a fixed ratio.

namespace flowvo {

inline constexpr int kPyramidLevels = 8;
inline constexpr double kPyramidRatio = 1.2;
inline constexpr int kMinPyramidInput = 64;

struct Pyramid {
    std::vector<GrayImage> levels; // levels[0] is the input image
    double ratio = kPyramidRatio;

    int level_count() const { return static_cast<int>(levels.size()); }
    // Factor mapping level-L coordinates back to level-0 coordinates.
    double scale(int level) const { return std::pow(ratio, level); }

    // Exact per-axis scale between level 0 and level L (the integer level
    // sizes make this differ slightly from ratio^L).
    double x_scale(int level) const {
        return static_cast<double>(levels[0].width) / levels[level].width;
    }
    double y_scale(int level) const {
        return static_cast<double>(levels[0].height) / levels[level].height;
    }

    // Centre-aligned coordinate transforms between level 0 and level L.
    PixelPoint to_level(PixelPoint base, int level) const {
        return {(base.x + 0.5) / x_scale(level) - 0.5, (base.y + 0.5) / y_scale(level) - 0.5};
    }
    PixelPoint to_base(PixelPoint at_level, int level) const {
        return {(at_level.x + 0.5) * x_scale(level) - 0.5,
                (at_level.y + 0.5) * y_scale(level) - 0.5};
    }
};

namespace detail {

// Separable [1 2 1]/4 smoothing with replicated borders. Integer rounding
// keeps constant images exactly constant.
inline GrayImage binomial_smooth(const GrayImage& src) {
    GrayImage tmp = GrayImage::blank(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const int xl = std::max(x - 1, 0);
            const int xr = std::min(x + 1, src.width - 1);
            tmp.at(x, y) = static_cast<std::uint8_t>(
                (src.at(xl, y) + 2 * src.at(x, y) + src.at(xr, y) + 2) >> 2);
        }
    }
    GrayImage out = GrayImage::blank(src.width, src.height);
    for (int y = 0; y < src.height; ++y) {
        const int yu = std::max(y - 1, 0);
        const int yd = std::min(y + 1, src.height - 1);
        for (int x = 0; x < src.width; ++x) {
            out.at(x, y) = static_cast<std::uint8_t>(
                (tmp.at(x, yu) + 2 * tmp.at(x, y) + tmp.at(x, yd) + 2) >> 2);
        }
    }
    return out;
}

inline GrayImage resample_bilinear(const GrayImage& src, int w, int h) {
    GrayImage out = GrayImage::blank(w, h);
    const double sx = static_cast<double>(src.width) / w;
    const double sy = static_cast<double>(src.height) / h;
    for (int y = 0; y < h; ++y) {
        double srcy = (y + 0.5) * sy - 0.5;
        srcy = std::clamp(srcy, 0.0, src.height - 1.0 - 1e-9);
        for (int x = 0; x < w; ++x) {
            double srcx = (x + 0.5) * sx - 0.5;
            srcx = std::clamp(srcx, 0.0, src.width - 1.0 - 1e-9);
            out.at(x, y) = static_cast<std::uint8_t>(
                std::clamp<long>(std::lround(sample_bilinear(src, srcx, srcy)), 0, 255));
        }
    }
    return out;
}

} // namespace detail

inline Pyramid build_pyramid(const GrayImage& img, int levels = kPyramidLevels,
                             double ratio = kPyramidRatio) {
    if (img.width < kMinPyramidInput || img.height < kMinPyramidInput)
        throw Error(ErrorCode::InvalidInput, "build_pyramid: image smaller than 64x64");
    if (levels < 1 || ratio <= 1.0)
        throw Error(ErrorCode::InvalidInput, "build_pyramid: bad level count or ratio");
    Pyramid pyr;
    pyr.ratio = ratio;
    pyr.levels.reserve(levels);
    pyr.levels.push_back(img);
    for (int l = 1; l < levels; ++l) {
        const int w = static_cast<int>(std::floor(img.width / std::pow(ratio, l)));
        const int h = static_cast<int>(std::floor(img.height / std::pow(ratio, l)));
        pyr.levels.push_back(detail::resample_bilinear(detail::binomial_smooth(pyr.levels.back()), w, h));
    }
    return pyr;
}

} // namespace flowvo
