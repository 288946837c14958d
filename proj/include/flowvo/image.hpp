#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "flowvo/core.hpp"

namespace flowvo {

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // row-major

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

    static GrayImage blank(int w, int h, std::uint8_t fill = 0) {
        GrayImage img;
        img.width = w;
        img.height = h;
        img.data.assign(static_cast<std::size_t>(w) * h, fill);
        return img;
    }
};

struct DepthImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> data; // raw sensor units, 0 = missing

    std::uint16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

    static DepthImage blank(int w, int h, std::uint16_t fill = 0) {
        DepthImage img;
        img.width = w;
        img.height = h;
        img.data.assign(static_cast<std::size_t>(w) * h, fill);
        return img;
    }
};

// ITU-R BT.601 luma, rounded to nearest.
inline std::uint8_t rgb_to_gray(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::lround(y));
}

// Sampling domain stops 1e-9 short of the last row/column so the 2x2
// bilinear support never leaves the image.
inline bool in_sample_bounds(const GrayImage& img, double x, double y) {
    return x >= 0.0 && y >= 0.0 && x <= img.width - 1.0 - 1e-9 && y <= img.height - 1.0 - 1e-9;
}

// Bilinear intensity lookup; exact at integer coordinates.
inline float sample_bilinear(const GrayImage& img, double x, double y) {
    if (!in_sample_bounds(img, x, y))
        throw Error(ErrorCode::OutOfBounds, "sample_bilinear: coordinate outside image");
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = x0 + 1;
    const int y1 = y0 + 1;
    const float ax = static_cast<float>(x - x0);
    const float ay = static_cast<float>(y - y0);
    const float v00 = img.at(x0, y0);
    const float v10 = img.at(x1, y0);
    const float v01 = img.at(x0, y1);
    const float v11 = img.at(x1, y1);
    const float top = v00 + ax * (v10 - v00);
    const float bot = v01 + ax * (v11 - v01);
    return top + ay * (bot - top);
}

// Square patch of intensities and central-difference gradients around a
// (possibly subpixel) centre. Side length is 2*half_window+1.
struct GradientPatch {
    int half_window = 0;
    std::vector<float> value; // intensity at each patch sample
    std::vector<float> ix;    // d/dx
    std::vector<float> iy;    // d/dy

    int side() const { return 2 * half_window + 1; }
    int count() const { return side() * side(); }
};

// Requires centre +- (half_window + 1) inside the image so that the
// central differences never leave it.
inline GradientPatch patch_gradients(const GrayImage& img, PixelPoint centre, int half_window) {
    const double reach = half_window + 1.0;
    if (!in_sample_bounds(img, centre.x - reach, centre.y - reach) ||
        !in_sample_bounds(img, centre.x + reach, centre.y + reach))
        throw Error(ErrorCode::OutOfBounds, "patch_gradients: window exits image");
    GradientPatch p;
    p.half_window = half_window;
    p.value.reserve(p.count());
    p.ix.reserve(p.count());
    p.iy.reserve(p.count());
    for (int dy = -half_window; dy <= half_window; ++dy) {
        for (int dx = -half_window; dx <= half_window; ++dx) {
            const double x = centre.x + dx;
            const double y = centre.y + dy;
            p.value.push_back(sample_bilinear(img, x, y));
            p.ix.push_back(0.5f * (sample_bilinear(img, x + 1, y) - sample_bilinear(img, x - 1, y)));
            p.iy.push_back(0.5f * (sample_bilinear(img, x, y + 1) - sample_bilinear(img, x, y - 1)));
        }
    }
    return p;
}

} // namespace flowvo
