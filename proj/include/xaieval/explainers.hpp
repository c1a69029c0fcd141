#pragma once
// Explainer interface plus the benchmarked methods and the reference
// explainers (ground truth, inverted, random) that give the evaluation
// protocol a falsifiable sanity axis.

#include <memory>
#include <string>

#include "xaieval/dataset.hpp"
#include "xaieval/gradcam.hpp"
#include "xaieval/image_ops.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/sobol.hpp"
#include "xaieval/types.hpp"

namespace xaieval {

class Explainer {
public:
    virtual ~Explainer() = default;
    virtual std::string id() const = 0;
    virtual SaliencyMap explain(WhiteBoxSegModel& utility, const DataItem& item,
                                int target_class) = 0;
};

class SobolExplainer final : public Explainer {
public:
    explicit SobolExplainer(SobolConfig cfg) : cfg_(cfg) {}
    std::string id() const override { return "seg_sobol"; }
    SaliencyMap explain(WhiteBoxSegModel& utility, const DataItem& item,
                        int target_class) override {
        return seg_sobol_explain(utility, item.image, target_class, cfg_);
    }

private:
    SobolConfig cfg_;
};

class GradCamExplainer final : public Explainer {
public:
    GradCamExplainer(LayerSelector sel, bool plus_plus)
        : sel_(std::move(sel)), pp_(plus_plus) {}
    std::string id() const override { return pp_ ? "seg_grad_cam_pp" : "seg_grad_cam"; }
    SaliencyMap explain(WhiteBoxSegModel& utility, const DataItem& item,
                        int target_class) override {
        return pp_ ? seg_grad_cam_pp(utility, item.image, target_class, sel_)
                   : seg_grad_cam(utility, item.image, target_class, sel_);
    }

private:
    LayerSelector sel_;
    bool pp_;
};

// Dilated ground-truth mask, min-max normalized. The dilation keeps the
// boundary context that drives the segmentation decision visible.
class GroundTruthExplainer final : public Explainer {
public:
    explicit GroundTruthExplainer(int dilate_radius = 8) : radius_(dilate_radius) {}
    std::string id() const override { return "ground_truth"; }
    SaliencyMap explain(WhiteBoxSegModel&, const DataItem& item, int target_class) override {
        const Grid d = dilate_class(item.mask, target_class, radius_);
        bool empty = true;
        for (float v : d.v)
            if (v != 0.0f) { empty = false; break; }
        SaliencyMap s = normalize_saliency(d, target_class, id(), empty);
        return s;
    }

private:
    int radius_;
};

class InvertedExplainer final : public Explainer {
public:
    explicit InvertedExplainer(int dilate_radius = 8) : radius_(dilate_radius) {}
    std::string id() const override { return "inverted"; }
    SaliencyMap explain(WhiteBoxSegModel&, const DataItem& item, int target_class) override {
        Grid d = dilate_class(item.mask, target_class, radius_);
        for (auto& v : d.v) v = 1.0f - v;
        return make_saliency(std::move(d), target_class, id());
    }

private:
    int radius_;
};

// Per-pixel uniform noise, reproducible per (seed, image id).
class RandomExplainer final : public Explainer {
public:
    explicit RandomExplainer(std::uint64_t seed = 0) : seed_(seed) {}
    std::string id() const override { return "random"; }
    SaliencyMap explain(WhiteBoxSegModel&, const DataItem& item, int target_class) override {
        Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(item.id)));
        Grid g(item.image.h, item.image.w);
        for (auto& v : g.v) v = static_cast<float>(rng.uniform());
        return make_saliency(std::move(g), target_class, id());
    }

private:
    std::uint64_t seed_;
};

}  // namespace xaieval
