#pragma once
// PNG export for rasters (8-bit grayscale / RGB via libpng).

#include <png.h>

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "xaieval/types.hpp"

namespace xaieval {

namespace detail {

inline void write_png_rows(const std::string& path, int h, int w, int channels,
                           const std::vector<unsigned char>& interleaved) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("png: init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("png: write failed for " + path);
    }
    png_init_io(png, fp);
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, w, h, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int i = 0; i < h; ++i)
        rows[i] = const_cast<png_bytep>(&interleaved[static_cast<std::size_t>(i) * w * channels]);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline unsigned char to_byte(float x) {
    const float c = x < 0.0f ? 0.0f : (x > 1.0f ? 1.0f : x);
    return static_cast<unsigned char>(c * 255.0f + 0.5f);
}

}  // namespace detail

// Grayscale export of an H×W plane in [0, 1].
inline void write_png_gray(const std::string& path, const Grid& g) {
    std::vector<unsigned char> buf(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] = detail::to_byte(g.v[i]);
    detail::write_png_rows(path, g.h, g.w, 1, buf);
}

// Image export: 1 channel maps to grayscale, 3 to RGB.
inline void write_png_image(const std::string& path, const Image& img) {
    std::vector<unsigned char> buf(static_cast<std::size_t>(img.h) * img.w * img.c);
    for (int i = 0; i < img.h; ++i)
        for (int j = 0; j < img.w; ++j)
            for (int ch = 0; ch < img.c; ++ch)
                buf[(static_cast<std::size_t>(i) * img.w + j) * img.c + ch] =
                    detail::to_byte(img.at(ch, i, j));
    detail::write_png_rows(path, img.h, img.w, img.c, buf);
}

// Label mask export with a fixed small palette mapped to grayscale levels.
inline void write_png_mask(const std::string& path, const SegMask& m) {
    std::vector<unsigned char> buf(static_cast<std::size_t>(m.h) * m.w);
    const int denom = std::max(1, m.num_classes - 1);
    for (int i = 0; i < m.h; ++i)
        for (int j = 0; j < m.w; ++j)
            buf[static_cast<std::size_t>(i) * m.w + j] =
                static_cast<unsigned char>(255 * m.at(i, j) / denom);
    detail::write_png_rows(path, m.h, m.w, 1, buf);
}

}  // namespace xaieval
