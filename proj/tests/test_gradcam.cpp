#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "xaieval/gradcam.hpp"
#include "xaieval/rng.hpp"

using namespace xaieval;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    return make_image(1, h, w, std::move(v));
}

// Fixed logits everywhere: the region score has zero gradient.
struct ConstantLogitModel final : WhiteBoxSegModel {
    ProbMask predict(const Image& img) const override {
        ProbMask pm;
        pm.k = 2;
        pm.h = img.h;
        pm.w = img.w;
        pm.v.assign(static_cast<std::size_t>(2) * img.h * img.w, 0.5f);
        return pm;
    }
    int num_classes() const override { return 2; }
    std::vector<std::string> activation_layers() const override { return {"bottleneck"}; }
    void forward_white(const Image& img, const std::string&, Tensor3& logits,
                       Tensor3& activation) override {
        logits = Tensor3(2, img.h, img.w, 1.5f);
        activation = Tensor3(4, img.h / 4, img.w / 4, 0.3f);
        act_shape_ = activation;
    }
    Tensor3 grad_at_layer(const Tensor3&) override {
        return Tensor3(act_shape_.c, act_shape_.h, act_shape_.w, 0.0f);
    }
    Tensor3 act_shape_;
};

// Multiplies the inner model's logits by a positive constant.
struct ScaledLogitModel final : WhiteBoxSegModel {
    UnetSegModel* inner;
    float scale;
    ScaledLogitModel(UnetSegModel* m, float s) : inner(m), scale(s) {}
    ProbMask predict(const Image& img) const override { return inner->predict(img); }
    int num_classes() const override { return inner->num_classes(); }
    std::vector<std::string> activation_layers() const override {
        return inner->activation_layers();
    }
    void forward_white(const Image& img, const std::string& layer, Tensor3& logits,
                       Tensor3& activation) override {
        inner->forward_white(img, layer, logits, activation);
        for (auto& v : logits.v) v *= scale;
    }
    Tensor3 grad_at_layer(const Tensor3& dlogits) override {
        Tensor3 scaled = dlogits;
        for (auto& v : scaled.v) v *= scale;
        return inner->grad_at_layer(scaled);
    }
};

UnetSegModel untrained_model(std::uint64_t seed = 3) {
    UNetConfig cfg;
    cfg.in_c = 1;
    cfg.base_c = 4;
    cfg.out_c = 2;
    cfg.init_seed = seed;
    return UnetSegModel(UNet(cfg));
}

}  // namespace

TEST_CASE("constant-logit models give all-zero degenerate maps") {
    ConstantLogitModel model;
    const Image img = random_image(32, 32, 5);
    const SaliencyMap cam = seg_grad_cam(model, img, 1);
    CHECK(cam.degenerate);
    for (float v : cam.values.v) CHECK(v == 0.0f);
    CHECK(cam.values.h == 32);
    CHECK(cam.values.w == 32);

    const SaliencyMap campp = seg_grad_cam_pp(model, img, 1);
    CHECK(campp.degenerate);
    for (float v : campp.values.v) CHECK(v == 0.0f);
}

TEST_CASE("maps are normalized to exactly [0,1] with image dims") {
    UnetSegModel model = untrained_model();
    const Image img = random_image(32, 32, 6);
    for (const bool pp : {false, true}) {
        const SaliencyMap sal = pp ? seg_grad_cam_pp(model, img, 1)
                                   : seg_grad_cam(model, img, 1);
        REQUIRE_FALSE(sal.degenerate);
        CHECK(sal.values.h == img.h);
        CHECK(sal.values.w == img.w);
        float lo = 1.0f, hi = 0.0f;
        for (float v : sal.values.v) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        CHECK(lo == 0.0f);
        CHECK(hi == 1.0f);
    }
}

TEST_CASE("positive scaling of the score leaves the map unchanged") {
    UnetSegModel inner = untrained_model(9);
    UnetSegModel inner2 = untrained_model(9);
    ScaledLogitModel scaled(&inner2, 3.7f);
    const Image img = random_image(32, 32, 7);

    const SaliencyMap base = seg_grad_cam(inner, img, 1);
    const SaliencyMap scl = seg_grad_cam(scaled, img, 1);
    REQUIRE(base.values.v.size() == scl.values.v.size());
    std::size_t argmax_base = 0, argmax_scl = 0;
    for (std::size_t i = 0; i < base.values.v.size(); ++i) {
        if (base.values.v[i] > base.values.v[argmax_base]) argmax_base = i;
        if (scl.values.v[i] > scl.values.v[argmax_scl]) argmax_scl = i;
        CHECK(std::abs(base.values.v[i] - scl.values.v[i]) < 1e-4f);
    }
    CHECK(argmax_base == argmax_scl);
}

TEST_CASE("explicit regions are honored and validated") {
    UnetSegModel model = untrained_model(11);
    const Image img = random_image(32, 32, 8);
    const Region full = full_region(32, 32);
    const SaliencyMap a = seg_grad_cam(model, img, 1, {}, full);
    CHECK(a.values.h == 32);
    const Region bad = full_region(16, 16);
    CHECK_THROWS_AS(seg_grad_cam(model, img, 1, {}, bad), std::invalid_argument);
    CHECK_THROWS_AS(seg_grad_cam(model, img, 5), std::invalid_argument);
}

TEST_CASE("determinism for fixed weights and input") {
    UnetSegModel model = untrained_model(13);
    const Image img = random_image(32, 32, 9);
    const SaliencyMap a = seg_grad_cam_pp(model, img, 1);
    const SaliencyMap b = seg_grad_cam_pp(model, img, 1);
    CHECK(a.values.v == b.values.v);
}

TEST_CASE("unknown layers are rejected") {
    UnetSegModel model = untrained_model(15);
    const Image img = random_image(32, 32, 10);
    LayerSelector sel;
    sel.layer_id = "nonexistent";
    CHECK_THROWS_AS(seg_grad_cam(model, img, 1, sel), std::invalid_argument);
}
