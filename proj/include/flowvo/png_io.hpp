#pragma once

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <png.h>

#include "flowvo/core.hpp"
#include "flowvo/image.hpp"

// Thin libpng wrappers for the two formats the datasets use: 8-bit intensity
// (gray or RGB via BT.601) and 16-bit big-endian depth.

namespace flowvo {

namespace detail {

struct PngReader {
    FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;

    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }

    void open(const std::string& path) {
        fp = std::fopen(path.c_str(), "rb");
        if (!fp) throw Error(ErrorCode::MissingFile, "cannot open " + path);
        png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) throw Error(ErrorCode::InvalidInput, "png allocation failed");
    }
};

struct PngWriter {
    FILE* fp = nullptr;
    png_structp png = nullptr;
    png_infop info = nullptr;

    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }

    void open(const std::string& path) {
        fp = std::fopen(path.c_str(), "wb");
        if (!fp) throw Error(ErrorCode::MissingFile, "cannot open " + path + " for writing");
        png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info) throw Error(ErrorCode::InvalidInput, "png allocation failed");
    }
};

} // namespace detail

// Decode an intensity image. Gray, gray+alpha, palette, RGB and RGBA inputs
// are accepted; colour is reduced with BT.601 weights.
inline GrayImage read_png_gray(const std::string& path) {
    detail::PngReader r;
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    r.open(path);
    if (setjmp(png_jmpbuf(r.png)))
        throw Error(ErrorCode::InvalidInput, "png decode failed: " + path);
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);

    const png_byte color = png_get_color_type(r.png, r.info);
    const png_byte depth = png_get_bit_depth(r.png, r.info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (depth == 16) png_set_strip_16(r.png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    png_read_update_info(r.png, r.info);

    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    const int channels = png_get_channels(r.png, r.info);
    if (channels != 1 && channels != 3)
        throw Error(ErrorCode::InvalidInput, "png: unsupported channel layout in " + path);

    raw.resize(static_cast<std::size_t>(w) * h * channels);
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    GrayImage img = GrayImage::blank(w, h);
    if (channels == 1) {
        std::memcpy(img.data.data(), raw.data(), raw.size());
    } else {
        for (std::size_t i = 0, n = static_cast<std::size_t>(w) * h; i < n; ++i)
            img.data[i] = rgb_to_gray(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
    }
    return img;
}

// Decode a 16-bit grayscale depth image (big-endian sample order per the PNG
// format). Raw value 0 means "no reading".
inline DepthImage read_png_depth16(const std::string& path) {
    detail::PngReader r;
    std::vector<std::uint8_t> raw;
    std::vector<png_bytep> rows;
    r.open(path);
    if (setjmp(png_jmpbuf(r.png)))
        throw Error(ErrorCode::InvalidInput, "png decode failed: " + path);
    png_init_io(r.png, r.fp);
    png_read_info(r.png, r.info);

    if (png_get_color_type(r.png, r.info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(r.png, r.info) != 16)
        throw Error(ErrorCode::InvalidInput, "png: depth image must be 16-bit gray: " + path);
    png_read_update_info(r.png, r.info);

    const int w = static_cast<int>(png_get_image_width(r.png, r.info));
    const int h = static_cast<int>(png_get_image_height(r.png, r.info));
    raw.resize(static_cast<std::size_t>(w) * h * 2);
    rows.resize(h);
    for (int y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w * 2;
    png_read_image(r.png, rows.data());
    png_read_end(r.png, nullptr);

    DepthImage img = DepthImage::blank(w, h);
    for (std::size_t i = 0, n = static_cast<std::size_t>(w) * h; i < n; ++i)
        img.data[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    return img;
}

inline void write_png_gray8(const GrayImage& img, const std::string& path) {
    detail::PngWriter w;
    std::vector<png_bytep> rows(img.height);
    w.open(path);
    if (setjmp(png_jmpbuf(w.png)))
        throw Error(ErrorCode::InvalidInput, "png encode failed: " + path);
    png_init_io(w.png, w.fp);
    png_set_IHDR(w.png, w.info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + static_cast<std::size_t>(y) * img.width);
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

inline void write_png_gray16(const DepthImage& img, const std::string& path) {
    detail::PngWriter w;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.width) * img.height * 2);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t i = 0, n = static_cast<std::size_t>(img.width) * img.height; i < n; ++i) {
        raw[2 * i] = static_cast<std::uint8_t>(img.data[i] >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(img.data[i] & 0xff);
    }
    w.open(path);
    if (setjmp(png_jmpbuf(w.png)))
        throw Error(ErrorCode::InvalidInput, "png encode failed: " + path);
    png_init_io(w.png, w.fp);
    png_set_IHDR(w.png, w.info, img.width, img.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    for (int y = 0; y < img.height; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * img.width * 2;
    png_write_image(w.png, rows.data());
    png_write_end(w.png, nullptr);
}

// Binary PGM, handy for quick visual checks of overlays.
inline void write_pgm(const GrayImage& img, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw Error(ErrorCode::MissingFile, "cannot open " + path + " for writing");
    std::fprintf(fp, "P5\n%d %d\n255\n", img.width, img.height);
    std::fwrite(img.data.data(), 1, img.data.size(), fp);
    std::fclose(fp);
}

} // namespace flowvo
