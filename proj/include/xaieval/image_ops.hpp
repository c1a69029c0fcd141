#pragma once
// Raster utilities: bilinear resampling, Gaussian blur, binary dilation.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "xaieval/types.hpp"

namespace xaieval {

inline float clamp01(float x) { return std::min(1.0f, std::max(0.0f, x)); }

// Bilinear resize with half-pixel centers (the OpenCV INTER_LINEAR convention).
inline Grid bilinear_resize(const Grid& src, int out_h, int out_w) {
    if (src.h <= 0 || src.w <= 0 || out_h <= 0 || out_w <= 0)
        throw std::invalid_argument("bilinear_resize: empty raster");
    Grid dst(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int i = 0; i < out_h; ++i) {
        double fy = (i + 0.5) * sy - 0.5;
        fy = std::max(0.0, std::min(fy, static_cast<double>(src.h - 1)));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.h - 1);
        const double wy = fy - y0;
        for (int j = 0; j < out_w; ++j) {
            double fx = (j + 0.5) * sx - 0.5;
            fx = std::max(0.0, std::min(fx, static_cast<double>(src.w - 1)));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.w - 1);
            const double wx = fx - x0;
            const double top = src.at(y0, x0) * (1.0 - wx) + src.at(y0, x1) * wx;
            const double bot = src.at(y1, x0) * (1.0 - wx) + src.at(y1, x1) * wx;
            dst.at(i, j) = static_cast<float>(top * (1.0 - wy) + bot * wy);
        }
    }
    return dst;
}

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double x = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = x;
        sum += x;
    }
    for (auto& x : k) x /= sum;
    return k;
}

inline int reflect_index(int i, int n) {
    // Reflect without repeating the border sample (OpenCV BORDER_REFLECT_101).
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace detail

// Separable Gaussian blur with reflected borders, applied per channel.
inline Image gaussian_blur(const Image& src, double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur: sigma must be > 0");
    const auto k = detail::gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    Image tmp = src;
    Image dst = src;
    for (int ch = 0; ch < src.c; ++ch) {
        // Horizontal pass.
        for (int i = 0; i < src.h; ++i) {
            for (int j = 0; j < src.w; ++j) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += k[t + radius] * src.at(ch, i, detail::reflect_index(j + t, src.w));
                tmp.at(ch, i, j) = static_cast<float>(acc);
            }
        }
        // Vertical pass.
        for (int i = 0; i < src.h; ++i) {
            for (int j = 0; j < src.w; ++j) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += k[t + radius] * tmp.at(ch, detail::reflect_index(i + t, src.h), j);
                dst.at(ch, i, j) = clamp01(static_cast<float>(acc));
            }
        }
    }
    return dst;
}

// Binary dilation of {label == cls} with a disk structuring element.
inline Grid dilate_class(const SegMask& mask, int cls, int radius) {
    Grid out(mask.h, mask.w, 0.0f);
    std::vector<std::pair<int, int>> offsets;
    for (int di = -radius; di <= radius; ++di)
        for (int dj = -radius; dj <= radius; ++dj)
            if (di * di + dj * dj <= radius * radius) offsets.emplace_back(di, dj);
    for (int i = 0; i < mask.h; ++i) {
        for (int j = 0; j < mask.w; ++j) {
            if (mask.at(i, j) != cls) continue;
            for (auto [di, dj] : offsets) {
                const int y = i + di, x = j + dj;
                if (y >= 0 && y < mask.h && x >= 0 && x < mask.w) out.at(y, x) = 1.0f;
            }
        }
    }
    return out;
}

inline Region region_from_grid(const Grid& g, float threshold = 0.5f) {
    std::vector<std::uint8_t> m(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) m[i] = g.v[i] > threshold ? 1 : 0;
    return region_from_mask(g.h, g.w, std::move(m));
}

}  // namespace xaieval
