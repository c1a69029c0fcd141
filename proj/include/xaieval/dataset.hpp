#pragma once
// Synthetic segmentation task: filled disks and squares over a textured
// background. Generation is a pure function of (seed, n, size, K); the same
// arguments always reproduce the dataset bit for bit.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xaieval/hash.hpp"
#include "xaieval/image_ops.hpp"
#include "xaieval/png_io.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/types.hpp"

namespace xaieval {

struct DataItem {
    std::int64_t id = 0;
    Image image;
    SegMask mask;
};

struct Dataset {
    std::vector<DataItem> train;
    std::vector<DataItem> val;
    std::vector<DataItem> test;
    std::uint64_t seed = 0;
    int size = 0;
    int num_classes = 0;

    std::size_t total() const { return train.size() + val.size() + test.size(); }
};

namespace detail {

struct ShapeSpec {
    int kind = 0;  // 0 = disk, 1 = square
    double cy = 0, cx = 0, r = 0;
    float intensity = 0.8f;
};

inline bool shapes_overlap(const ShapeSpec& a, const ShapeSpec& b) {
    // Conservative: compare bounding circles (square circumradius = r*sqrt2).
    const double ra = a.kind == 0 ? a.r : a.r * 1.4142135624;
    const double rb = b.kind == 0 ? b.r : b.r * 1.4142135624;
    const double dy = a.cy - b.cy, dx = a.cx - b.cx;
    const double dist2 = dy * dy + dx * dx;
    const double lim = ra + rb + 2.0;
    return dist2 < lim * lim;
}

// Smooth random texture: bilinearly upsampled coarse grid plus pixel jitter.
inline Grid texture_field(Rng& rng, int size, float lo, float hi, float jitter) {
    const int coarse = 8;
    Grid base(coarse, coarse);
    for (auto& x : base.v) x = static_cast<float>(rng.uniform(lo, hi));
    Grid up = bilinear_resize(base, size, size);
    for (auto& x : up.v)
        x = clamp01(x + static_cast<float>(rng.uniform(-jitter, jitter)));
    return up;
}

inline DataItem gen_item(std::uint64_t item_seed, std::int64_t id, int size, int K) {
    // Radii chosen so one shape covers >= 5% of the raster and three
    // non-overlapping shapes stay under 50%.
    const double disk_rmin = 0.145 * size, disk_rmax = 0.195 * size;
    const double sq_hmin = 0.125 * size, sq_hmax = 0.180 * size;

    for (int round = 0;; ++round) {
        Rng rng(derive_seed(item_seed, static_cast<std::uint64_t>(round)));
        const int want = round >= 20 ? 1 : rng.uniform_int(1, 3);

        std::vector<ShapeSpec> shapes;
        bool ok = true;
        for (int sidx = 0; sidx < want; ++sidx) {
            bool placed = false;
            for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
                ShapeSpec s;
                s.kind = rng.uniform_int(0, 1);
                s.r = s.kind == 0 ? rng.uniform(disk_rmin, disk_rmax)
                                  : rng.uniform(sq_hmin, sq_hmax);
                const double margin = (s.kind == 0 ? s.r : s.r * 1.4142135624) + 2.0;
                s.cy = rng.uniform(margin, size - margin);
                s.cx = rng.uniform(margin, size - margin);
                s.intensity = static_cast<float>(rng.uniform(0.62, 0.92));
                bool clash = false;
                for (const auto& other : shapes)
                    if (shapes_overlap(s, other)) { clash = true; break; }
                if (!clash) {
                    shapes.push_back(s);
                    placed = true;
                }
            }
            if (!placed) { ok = false; break; }
        }
        if (!ok) continue;  // regenerate with perturbed geometry

        Grid tex = texture_field(rng, size, 0.12f, 0.42f, 0.05f);
        Image img;
        img.c = 1;
        img.h = size;
        img.w = size;
        img.v = tex.v;

        SegMask mask;
        mask.h = size;
        mask.w = size;
        mask.num_classes = K;
        mask.labels.assign(static_cast<std::size_t>(size) * size, 0);

        for (const auto& s : shapes) {
            const std::int32_t label = (K == 3 && s.kind == 1) ? 2 : 1;
            for (int i = 0; i < size; ++i) {
                for (int j = 0; j < size; ++j) {
                    const double dy = i - s.cy, dx = j - s.cx;
                    bool inside = s.kind == 0
                                      ? (dy * dy + dx * dx <= s.r * s.r)
                                      : (std::abs(dy) <= s.r && std::abs(dx) <= s.r);
                    if (!inside) continue;
                    mask.labels[static_cast<std::size_t>(i) * size + j] = label;
                    const float jit = static_cast<float>(rng.uniform(-0.04, 0.04));
                    img.at(0, i, j) = clamp01(s.intensity + jit);
                }
            }
        }

        DataItem item;
        item.id = id;
        item.image = std::move(img);
        item.mask = std::move(mask);
        return item;
    }
}

}  // namespace detail

// Generates n items and splits them 70/15/15 (train/val/test) in index order.
inline Dataset gen_shapes_dataset(std::uint64_t seed, int n, int size, int K) {
    if (n < 1) throw std::invalid_argument("gen_shapes_dataset: n must be >= 1");
    if (size < 32) throw std::invalid_argument("gen_shapes_dataset: size must be >= 32");
    if (K != 2 && K != 3) throw std::invalid_argument("gen_shapes_dataset: K must be 2 or 3");

    Dataset ds;
    ds.seed = seed;
    ds.size = size;
    ds.num_classes = K;

    const int n_train = std::max(1, static_cast<int>(n * 0.70));
    const int n_val = std::max(n > 1 ? 1 : 0, static_cast<int>(n * 0.15));
    for (int i = 0; i < n; ++i) {
        DataItem item = detail::gen_item(derive_seed(seed, static_cast<std::uint64_t>(i)), i, size, K);
        if (i < n_train)
            ds.train.push_back(std::move(item));
        else if (i < n_train + n_val)
            ds.val.push_back(std::move(item));
        else
            ds.test.push_back(std::move(item));
    }
    return ds;
}

inline std::string dataset_hash_hex(const Dataset& ds) {
    Fnv64 h;
    h.update_pod(ds.seed).update_pod(ds.size).update_pod(ds.num_classes);
    auto fold = [&h](const std::vector<DataItem>& items) {
        for (const auto& it : items) {
            h.update_pod(it.id);
            h.update_vec(it.image.v);
            h.update_vec(it.mask.labels);
        }
    };
    fold(ds.train);
    fold(ds.val);
    fold(ds.test);
    return h.hex();
}

// Optional PNG export of (image, mask) pairs into dir (must exist).
inline void export_dataset_png(const Dataset& ds, const std::string& dir) {
    auto dump = [&dir](const std::vector<DataItem>& items, const std::string& split) {
        for (const auto& it : items) {
            const std::string stem = dir + "/" + split + "_" + std::to_string(it.id);
            write_png_image(stem + "_image.png", it.image);
            write_png_mask(stem + "_mask.png", it.mask);
        }
    };
    dump(ds.train, "train");
    dump(ds.val, "val");
    dump(ds.test, "test");
}

}  // namespace xaieval
