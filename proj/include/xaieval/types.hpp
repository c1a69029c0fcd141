#pragma once
// Core raster types shared across the library. All factories validate their
// invariants and throw std::invalid_argument on violation.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xaieval {

// H×W float plane, row-major.
struct Grid {
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Grid() = default;
    Grid(int h_, int w_, float fill = 0.0f)
        : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

    float& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
    float at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
    std::size_t size() const { return v.size(); }
};

// C×H×W float raster with intensities in [0, 1]; planes stored contiguously.
struct Image {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    float& at(int ch, int i, int j) {
        return v[(static_cast<std::size_t>(ch) * h + i) * w + j];
    }
    float at(int ch, int i, int j) const {
        return v[(static_cast<std::size_t>(ch) * h + i) * w + j];
    }
    std::size_t size() const { return v.size(); }
};

// H×W integer labels in {0..num_classes-1}.
struct SegMask {
    int h = 0;
    int w = 0;
    int num_classes = 0;
    std::vector<std::int32_t> labels;

    std::int32_t at(int i, int j) const {
        return labels[static_cast<std::size_t>(i) * w + j];
    }
};

// K×H×W class probabilities; each pixel's K values sum to one.
struct ProbMask {
    int k = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    float at(int cls, int i, int j) const {
        return v[(static_cast<std::size_t>(cls) * h + i) * w + j];
    }
    float& at(int cls, int i, int j) {
        return v[(static_cast<std::size_t>(cls) * h + i) * w + j];
    }
};

// Per-pixel importance in [0, 1] for one target class.
struct SaliencyMap {
    Grid values;
    int target_class = 0;
    std::string method_id;
    bool degenerate = false;  // set when the producing method had no signal
};

// Per-pixel noise magnitude in [0, 1] emitted by the noise model.
struct NoiseMask {
    Grid values;
    std::string source_id;
};

// Subset of pixels on an H×W raster.
struct Region {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> mask;  // 1 = member
    std::int64_t count = 0;

    bool contains(int i, int j) const {
        return mask[static_cast<std::size_t>(i) * w + j] != 0;
    }
};

inline Image make_image(int c, int h, int w, std::vector<float> v) {
    if (c != 1 && c != 3) throw std::invalid_argument("Image: channels must be 1 or 3");
    if (h < 16 || w < 16) throw std::invalid_argument("Image: min size is 16x16");
    if (v.size() != static_cast<std::size_t>(c) * h * w)
        throw std::invalid_argument("Image: buffer size mismatch");
    for (float x : v) {
        if (!(x >= 0.0f && x <= 1.0f))
            throw std::invalid_argument("Image: values must lie in [0,1]");
    }
    Image img;
    img.c = c;
    img.h = h;
    img.w = w;
    img.v = std::move(v);
    return img;
}

inline SaliencyMap make_saliency(Grid values, int target_class, std::string method_id,
                                 bool degenerate = false) {
    for (float x : values.v) {
        if (!(x >= 0.0f && x <= 1.0f))
            throw std::invalid_argument("SaliencyMap: values must lie in [0,1]");
    }
    SaliencyMap s;
    s.values = std::move(values);
    s.target_class = target_class;
    s.method_id = std::move(method_id);
    s.degenerate = degenerate;
    return s;
}

inline NoiseMask make_noise_mask(Grid values, std::string source_id) {
    for (float x : values.v) {
        if (!(x >= 0.0f && x <= 1.0f))
            throw std::invalid_argument("NoiseMask: values must lie in [0,1]");
    }
    NoiseMask n;
    n.values = std::move(values);
    n.source_id = std::move(source_id);
    return n;
}

inline bool probmask_is_simplex(const ProbMask& p, double tol = 1e-5) {
    for (int i = 0; i < p.h; ++i) {
        for (int j = 0; j < p.w; ++j) {
            double s = 0.0;
            for (int cls = 0; cls < p.k; ++cls) {
                const float x = p.at(cls, i, j);
                if (!(x >= 0.0f && x <= 1.0f)) return false;
                s += x;
            }
            if (std::abs(s - 1.0) > tol) return false;
        }
    }
    return true;
}

// Min-max normalization of a raw importance plane into [0, 1].
// A constant plane maps to all zeros.
inline SaliencyMap normalize_saliency(const Grid& raw, int target_class = 0,
                                      std::string method_id = "",
                                      bool degenerate = false) {
    float lo = 0.0f, hi = 0.0f;
    bool first = true;
    for (float x : raw.v) {
        if (!std::isfinite(x))
            throw std::invalid_argument("normalize_saliency: non-finite input value");
        if (first) {
            lo = hi = x;
            first = false;
        } else {
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    }
    Grid out(raw.h, raw.w);
    if (hi > lo) {
        const float range = hi - lo;
        for (std::size_t i = 0; i < raw.v.size(); ++i)
            out.v[i] = (raw.v[i] - lo) / range;
    }
    SaliencyMap s;
    s.values = std::move(out);
    s.target_class = target_class;
    s.method_id = std::move(method_id);
    s.degenerate = degenerate;
    return s;
}

inline Region full_region(int h, int w) {
    Region r;
    r.h = h;
    r.w = w;
    r.mask.assign(static_cast<std::size_t>(h) * w, 1);
    r.count = static_cast<std::int64_t>(h) * w;
    return r;
}

inline Region region_from_mask(int h, int w, std::vector<std::uint8_t> mask) {
    if (mask.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("Region: mask size mismatch");
    Region r;
    r.h = h;
    r.w = w;
    r.mask = std::move(mask);
    r.count = 0;
    for (auto m : r.mask) r.count += (m != 0);
    return r;
}

}  // namespace xaieval
