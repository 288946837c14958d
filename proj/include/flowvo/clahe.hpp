#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "flowvo/core.hpp"
#include "flowvo/image.hpp"

// Contrast-limited adaptive histogram equalisation over a tile grid with
// bilinear blending between neighbouring tile transfer functions.

namespace flowvo {

struct ClaheParams {
    double clip_limit = 3.0;
    int tiles_x = 8;
    int tiles_y = 8;
};

namespace detail {

// Per-axis interpolation tables: the two bracketing tiles and the blend weight
// for every pixel coordinate, interpolating between tile centres.
struct AxisBlend {
    std::vector<int> lo, hi;
    std::vector<double> w;
};

inline AxisBlend axis_blend(int extent, int tiles) {
    std::vector<double> centre(tiles);
    for (int t = 0; t < tiles; ++t) {
        const int a = t * extent / tiles;
        const int b = (t + 1) * extent / tiles;
        centre[t] = 0.5 * (a + b - 1);
    }
    AxisBlend out;
    out.lo.resize(extent);
    out.hi.resize(extent);
    out.w.resize(extent);
    for (int x = 0; x < extent; ++x) {
        int hi = 0;
        while (hi < tiles && centre[hi] <= x) ++hi;
        const int lo = hi - 1;
        if (lo < 0) {
            out.lo[x] = out.hi[x] = 0;
            out.w[x] = 0.0;
        } else if (hi >= tiles) {
            out.lo[x] = out.hi[x] = tiles - 1;
            out.w[x] = 0.0;
        } else {
            out.lo[x] = lo;
            out.hi[x] = hi;
            out.w[x] = (x - centre[lo]) / (centre[hi] - centre[lo]);
        }
    }
    return out;
}

} // namespace detail

inline GrayImage clahe(const GrayImage& img, const ClaheParams& params = {}) {
    if (params.tiles_x < 1 || params.tiles_y < 1 || params.clip_limit <= 0.0)
        throw Error(ErrorCode::InvalidInput, "clahe: bad parameters");
    if (img.width < params.tiles_x || img.height < params.tiles_y)
        throw Error(ErrorCode::InvalidInput, "clahe: image smaller than tile grid");

    const int tx = params.tiles_x;
    const int ty = params.tiles_y;
    std::vector<std::array<std::uint8_t, 256>> luts(static_cast<std::size_t>(tx) * ty);

    for (int tj = 0; tj < ty; ++tj) {
        const int y0 = tj * img.height / ty;
        const int y1 = (tj + 1) * img.height / ty;
        for (int ti = 0; ti < tx; ++ti) {
            const int x0 = ti * img.width / tx;
            const int x1 = (ti + 1) * img.width / tx;
            const int area = (x1 - x0) * (y1 - y0);

            std::array<int, 256> hist{};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) ++hist[img.at(x, y)];

            // Clip and spread the excess uniformly, remainder one count at a
            // time over evenly spaced bins.
            const int clip = std::max(1, static_cast<int>(params.clip_limit * area / 256.0));
            int excess = 0;
            for (int& h : hist) {
                if (h > clip) {
                    excess += h - clip;
                    h = clip;
                }
            }
            const int batch = excess / 256;
            int residual = excess % 256;
            for (int& h : hist) h += batch;
            if (residual > 0) {
                const int step = std::max(1, 256 / residual);
                for (int b = 0; b < 256 && residual > 0; b += step, --residual) ++hist[b];
            }

            auto& lut = luts[static_cast<std::size_t>(tj) * tx + ti];
            const double scale = 255.0 / area;
            int cdf = 0;
            for (int b = 0; b < 256; ++b) {
                cdf += hist[b];
                lut[b] = static_cast<std::uint8_t>(
                    std::clamp<long>(std::lround(cdf * scale), 0, 255));
            }
        }
    }

    const detail::AxisBlend bx = detail::axis_blend(img.width, tx);
    const detail::AxisBlend by = detail::axis_blend(img.height, ty);
    GrayImage out = GrayImage::blank(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        const int j0 = by.lo[y], j1 = by.hi[y];
        const double wy = by.w[y];
        for (int x = 0; x < img.width; ++x) {
            const int i0 = bx.lo[x], i1 = bx.hi[x];
            const double wx = bx.w[x];
            const std::uint8_t v = img.at(x, y);
            const double top = (1.0 - wx) * luts[static_cast<std::size_t>(j0) * tx + i0][v] +
                               wx * luts[static_cast<std::size_t>(j0) * tx + i1][v];
            const double bot = (1.0 - wx) * luts[static_cast<std::size_t>(j1) * tx + i0][v] +
                               wx * luts[static_cast<std::size_t>(j1) * tx + i1][v];
            out.at(x, y) = static_cast<std::uint8_t>(
                std::clamp<long>(std::lround((1.0 - wy) * top + wy * bot), 0, 255));
        }
    }
    return out;
}

} // namespace flowvo
