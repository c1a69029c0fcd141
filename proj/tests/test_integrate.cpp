#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "xaieval/integrate.hpp"
#include "xaieval/rng.hpp"

using namespace xaieval;

namespace {

Image const_image(int h, int w, float v) {
    return make_image(1, h, w, std::vector<float>(static_cast<std::size_t>(h) * w, v));
}

Image random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    return make_image(1, h, w, std::move(v));
}

SaliencyMap const_saliency(int h, int w, float v) {
    return make_saliency(Grid(h, w, v), 0, "const");
}

}  // namespace

TEST_CASE("integrate_mul identities") {
    const Image img = random_image(16, 16, 1);
    const ExplanationMap ones = integrate_mul(img, const_saliency(16, 16, 1.0f));
    CHECK(ones.pixels.v == img.v);  // bit-exact identity
    const ExplanationMap zeros = integrate_mul(img, const_saliency(16, 16, 0.0f));
    for (float v : zeros.pixels.v) CHECK(v == 0.0f);

    const Image half = const_image(16, 16, 0.5f);
    const ExplanationMap prod = integrate_mul(half, const_saliency(16, 16, 0.4f));
    for (float v : prod.pixels.v) CHECK(v == Catch::Approx(0.2f).margin(1e-7));
}

TEST_CASE("integrate_add identities and clamping") {
    const Image img = random_image(16, 16, 2);
    const ExplanationMap zero = integrate_add(img, const_saliency(16, 16, 0.0f));
    CHECK(zero.pixels.v == img.v);  // bit-exact identity

    const ExplanationMap clamp = integrate_add(const_image(16, 16, 0.9f),
                                               const_saliency(16, 16, 0.9f));
    for (float v : clamp.pixels.v) CHECK(v == 1.0f);

    const ExplanationMap sum = integrate_add(const_image(16, 16, 0.3f),
                                             const_saliency(16, 16, 0.2f));
    for (float v : sum.pixels.v) CHECK(v == Catch::Approx(0.5f).margin(1e-7));
}

TEST_CASE("integration rejects dimension mismatches") {
    const Image img = const_image(16, 16, 0.5f);
    const SaliencyMap bad = const_saliency(16, 17, 0.5f);
    CHECK_THROWS_AS(integrate_mul(img, bad), std::invalid_argument);
    CHECK_THROWS_AS(integrate_add(img, bad), std::invalid_argument);
    CHECK_THROWS_AS(integrate_nsm(img, bad, {}), std::invalid_argument);
    CHECK_THROWS_AS(integrate_nsa(img, bad, {}), std::invalid_argument);
}

TEST_CASE("sampling variants degenerate to deterministic ones at tiny sigma") {
    const Image img = random_image(24, 24, 3);
    Rng rng(4);
    Grid sal_grid(24, 24);
    for (auto& v : sal_grid.v) v = static_cast<float>(rng.uniform());
    const SaliencyMap sal = make_saliency(sal_grid, 0, "rand");

    SamplingConfig cfg;
    cfg.sigma = 1e-9;
    cfg.seed = 11;
    const ExplanationMap nsm = integrate_nsm(img, sal, cfg);
    const ExplanationMap mul = integrate_mul(img, sal);
    for (std::size_t i = 0; i < nsm.pixels.v.size(); ++i)
        CHECK(std::abs(nsm.pixels.v[i] - mul.pixels.v[i]) < 1e-6f);

    const ExplanationMap nsa = integrate_nsa(img, sal, cfg);
    const ExplanationMap add = integrate_add(img, sal);
    for (std::size_t i = 0; i < nsa.pixels.v.size(); ++i)
        CHECK(std::abs(nsa.pixels.v[i] - add.pixels.v[i]) < 1e-6f);
}

TEST_CASE("sampling variants are pure functions of the seed") {
    const Image img = random_image(16, 16, 5);
    const SaliencyMap sal = const_saliency(16, 16, 0.5f);
    SamplingConfig cfg;
    cfg.sigma = 0.25;
    cfg.seed = 99;
    const ExplanationMap a = integrate_nsm(img, sal, cfg);
    const ExplanationMap b = integrate_nsm(img, sal, cfg);
    CHECK(a.pixels.v == b.pixels.v);
    const ExplanationMap c = integrate_nsa(img, sal, cfg);
    const ExplanationMap d = integrate_nsa(img, sal, cfg);
    CHECK(c.pixels.v == d.pixels.v);

    cfg.seed = 100;
    const ExplanationMap e = integrate_nsm(img, sal, cfg);
    CHECK(a.pixels.v != e.pixels.v);
}

TEST_CASE("nsm sampled ratio concentrates around the saliency mean") {
    const Image img = const_image(64, 64, 0.8f);
    const SaliencyMap sal = const_saliency(64, 64, 0.5f);
    SamplingConfig cfg;
    cfg.sigma = 0.1;
    cfg.seed = 17;
    const ExplanationMap e = integrate_nsm(img, sal, cfg);
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < e.pixels.v.size(); ++i)
        ratio_sum += e.pixels.v[i] / 0.8;
    const double mean_ratio = ratio_sum / static_cast<double>(e.pixels.v.size());
    CHECK(mean_ratio >= 0.45);
    CHECK(mean_ratio <= 0.55);
}

TEST_CASE("nsa perturbation magnitude matches the half-normal mean") {
    const Image img = const_image(64, 64, 0.5f);
    const SaliencyMap sal = const_saliency(64, 64, 0.0f);
    SamplingConfig cfg;
    cfg.sigma = 0.05;
    cfg.seed = 23;
    const ExplanationMap e = integrate_nsa(img, sal, cfg);
    double acc = 0.0;
    for (std::size_t i = 0; i < e.pixels.v.size(); ++i)
        acc += std::abs(e.pixels.v[i] - 0.5);
    const double mean_abs = acc / static_cast<double>(e.pixels.v.size());
    CHECK(mean_abs <= 0.05 * std::sqrt(2.0 / 3.14159265358979) + 0.01);
}

TEST_CASE("all techniques stay within [0,1] on randomized inputs") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const Image img = random_image(20, 20, 100 + trial);
        Rng rng(200 + trial);
        Grid g(20, 20);
        for (auto& v : g.v) v = static_cast<float>(rng.uniform());
        const SaliencyMap sal = make_saliency(g, 0, "r");
        SamplingConfig cfg;
        cfg.sigma = 0.5;
        cfg.seed = trial;
        for (const auto& e : {integrate_mul(img, sal), integrate_add(img, sal),
                              integrate_nsm(img, sal, cfg), integrate_nsa(img, sal, cfg)}) {
            for (float v : e.pixels.v) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
    }
}

TEST_CASE("sampling rejects non-positive sigma") {
    const Image img = const_image(16, 16, 0.5f);
    const SaliencyMap sal = const_saliency(16, 16, 0.5f);
    SamplingConfig cfg;
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(integrate_nsm(img, sal, cfg), std::invalid_argument);
    cfg.sigma = -1.0;
    CHECK_THROWS_AS(integrate_nsa(img, sal, cfg), std::invalid_argument);
}
