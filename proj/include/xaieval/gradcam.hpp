#pragma once
// White-box CAM baselines adapted to segmentation: the class score is the sum
// of target-class logits over a pixel region (default: the pixels predicted
// as that class), and channel weights come from the gradient at an internal
// activation layer.

#include <cmath>
#include <optional>
#include <string>

#include "xaieval/image_ops.hpp"
#include "xaieval/seg_model.hpp"
#include "xaieval/types.hpp"

namespace xaieval {

struct LayerSelector {
    std::string layer_id = "bottleneck";  // deepest encoder activation
};

namespace detail {

inline Region predicted_region(const Tensor3& logits, int target_class) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(logits.h) * logits.w, 0);
    for (int i = 0; i < logits.h; ++i) {
        for (int j = 0; j < logits.w; ++j) {
            int best = 0;
            float bv = logits.at(0, i, j);
            for (int c = 1; c < logits.c; ++c)
                if (logits.at(c, i, j) > bv) { bv = logits.at(c, i, j); best = c; }
            if (best == target_class) mask[static_cast<std::size_t>(i) * logits.w + j] = 1;
        }
    }
    Region r = region_from_mask(logits.h, logits.w, std::move(mask));
    // Empty prediction: fall back to the full raster so the score is defined.
    if (r.count == 0) r = full_region(logits.h, logits.w);
    return r;
}

// dy/dlogits of y = Σ_region logits[target_class].
inline Tensor3 region_grad_seed(int k, int h, int w, int target_class, const Region& region) {
    Tensor3 d(k, h, w, 0.0f);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            if (region.contains(i, j)) d.at(target_class, i, j) = 1.0f;
    return d;
}

inline bool all_zero(const Tensor3& t) {
    for (float v : t.v)
        if (v != 0.0f) return false;
    return true;
}

inline SaliencyMap finish_cam(const Grid& cam, int h, int w, int target_class,
                              const std::string& method_id, bool degenerate) {
    Grid up = bilinear_resize(cam, h, w);
    return normalize_saliency(up, target_class, method_id, degenerate);
}

struct CamContext {
    Tensor3 activation;
    Tensor3 grad;
    int img_h = 0;
    int img_w = 0;
};

inline CamContext cam_forward_backward(WhiteBoxSegModel& model, const Image& img,
                                       int target_class, const LayerSelector& sel,
                                       const std::optional<Region>& region) {
    if (target_class < 0 || target_class >= model.num_classes())
        throw std::invalid_argument("gradcam: class index out of range");
    CamContext ctx;
    ctx.img_h = img.h;
    ctx.img_w = img.w;
    Tensor3 logits;
    model.forward_white(img, sel.layer_id, logits, ctx.activation);
    Region reg = region ? *region : predicted_region(logits, target_class);
    if (reg.h != logits.h || reg.w != logits.w)
        throw std::invalid_argument("gradcam: region dims mismatch");
    if (reg.count == 0) throw std::invalid_argument("gradcam: empty region");
    const Tensor3 seed = region_grad_seed(logits.c, logits.h, logits.w, target_class, reg);
    ctx.grad = model.grad_at_layer(seed);
    return ctx;
}

}  // namespace detail

// Channel weights are spatial means of the gradient; the map is
// ReLU(Σ_k w_k A_k), upsampled and min-max normalized.
inline SaliencyMap seg_grad_cam(WhiteBoxSegModel& model, const Image& img, int target_class,
                                const LayerSelector& sel = {},
                                const std::optional<Region>& region = std::nullopt) {
    const auto ctx = detail::cam_forward_backward(model, img, target_class, sel, region);
    const Tensor3& A = ctx.activation;
    const Tensor3& G = ctx.grad;
    if (detail::all_zero(G)) {
        SaliencyMap s;
        s.values = Grid(ctx.img_h, ctx.img_w, 0.0f);
        s.target_class = target_class;
        s.method_id = "seg_grad_cam";
        s.degenerate = true;
        return s;
    }
    const int hw = A.h * A.w;
    Grid cam(A.h, A.w, 0.0f);
    for (int k = 0; k < A.c; ++k) {
        double wsum = 0.0;
        for (int p = 0; p < hw; ++p) wsum += G.v[static_cast<std::size_t>(k) * hw + p];
        const float wk = static_cast<float>(wsum / hw);
        for (int p = 0; p < hw; ++p)
            cam.v[static_cast<std::size_t>(p)] += wk * A.v[static_cast<std::size_t>(k) * hw + p];
    }
    for (auto& v : cam.v) v = v > 0.0f ? v : 0.0f;  // ReLU
    return detail::finish_cam(cam, ctx.img_h, ctx.img_w, target_class, "seg_grad_cam", false);
}

// Grad-CAM++ pixel-wise alpha weights. With the exponential-of-score closed
// form the higher derivatives reduce to powers of the first-order gradient:
//   α = G² / (2G² + Σ_spatial(A)·G³),  w_k = Σ α ⊙ ReLU(G).
inline SaliencyMap seg_grad_cam_pp(WhiteBoxSegModel& model, const Image& img, int target_class,
                                   const LayerSelector& sel = {},
                                   const std::optional<Region>& region = std::nullopt) {
    const auto ctx = detail::cam_forward_backward(model, img, target_class, sel, region);
    const Tensor3& A = ctx.activation;
    const Tensor3& G = ctx.grad;
    if (detail::all_zero(G)) {
        SaliencyMap s;
        s.values = Grid(ctx.img_h, ctx.img_w, 0.0f);
        s.target_class = target_class;
        s.method_id = "seg_grad_cam_pp";
        s.degenerate = true;
        return s;
    }
    const int hw = A.h * A.w;
    Grid cam(A.h, A.w, 0.0f);
    for (int k = 0; k < A.c; ++k) {
        const float* a = A.v.data() + static_cast<std::size_t>(k) * hw;
        const float* g = G.v.data() + static_cast<std::size_t>(k) * hw;
        double a_sum = 0.0;
        for (int p = 0; p < hw; ++p) a_sum += a[p];
        double wk = 0.0;
        for (int p = 0; p < hw; ++p) {
            const double g2 = static_cast<double>(g[p]) * g[p];
            const double g3 = g2 * g[p];
            const double denom = 2.0 * g2 + a_sum * g3;
            const double alpha = denom != 0.0 ? g2 / denom : 0.0;
            wk += alpha * std::max(0.0, static_cast<double>(g[p]));
        }
        for (int p = 0; p < hw; ++p)
            cam.v[static_cast<std::size_t>(p)] += static_cast<float>(wk) * a[p];
    }
    for (auto& v : cam.v) v = v > 0.0f ? v : 0.0f;  // ReLU
    return detail::finish_cam(cam, ctx.img_h, ctx.img_w, target_class, "seg_grad_cam_pp", false);
}

}  // namespace xaieval
