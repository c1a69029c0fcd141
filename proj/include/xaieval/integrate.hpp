#pragma once
// Builds explanation maps from (image, saliency) pairs. Four techniques:
// plain multiplication, plain addition, and the two normal-sampling variants
// where the per-pixel saliency value becomes the mean of a Gaussian draw.
// Results are clamped to [0,1]; sampling variants are pure functions of
// (image, saliency, config).

#include <stdexcept>
#include <string>

#include "xaieval/image_ops.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/types.hpp"

namespace xaieval {

enum class Technique { mul, add, nsm, nsa };

inline const char* technique_name(Technique t) {
    switch (t) {
        case Technique::mul: return "mul";
        case Technique::add: return "add";
        case Technique::nsm: return "nsm";
        case Technique::nsa: return "nsa";
    }
    return "?";
}

inline Technique technique_from_name(const std::string& s) {
    if (s == "mul") return Technique::mul;
    if (s == "add") return Technique::add;
    if (s == "nsm") return Technique::nsm;
    if (s == "nsa") return Technique::nsa;
    throw std::invalid_argument("unknown integration technique '" + s + "'");
}

struct ExplanationMap {
    Image pixels;
    Technique technique = Technique::mul;
    std::string source_method;
};

struct SamplingConfig {
    double sigma = 0.1;
    std::uint64_t seed = 0;
};

namespace detail {

inline void check_dims(const Image& img, const SaliencyMap& sal) {
    if (sal.values.h != img.h || sal.values.w != img.w)
        throw std::invalid_argument("integrate: saliency dims do not match image");
}

// One Gaussian draw per pixel (shared across channels), mean = saliency value.
inline Grid sample_normal_field(const SaliencyMap& sal, const SamplingConfig& cfg) {
    if (cfg.sigma <= 0.0) throw std::invalid_argument("integrate: sigma must be > 0");
    Rng rng(cfg.seed);
    Grid n(sal.values.h, sal.values.w);
    for (std::size_t i = 0; i < n.v.size(); ++i)
        n.v[i] = static_cast<float>(rng.normal(sal.values.v[i], cfg.sigma));
    return n;
}

}  // namespace detail

inline ExplanationMap integrate_mul(const Image& img, const SaliencyMap& sal) {
    detail::check_dims(img, sal);
    ExplanationMap e;
    e.pixels = img;
    e.technique = Technique::mul;
    e.source_method = sal.method_id;
    for (int ch = 0; ch < img.c; ++ch)
        for (int i = 0; i < img.h; ++i)
            for (int j = 0; j < img.w; ++j)
                e.pixels.at(ch, i, j) = img.at(ch, i, j) * sal.values.at(i, j);
    return e;
}

inline ExplanationMap integrate_add(const Image& img, const SaliencyMap& sal) {
    detail::check_dims(img, sal);
    ExplanationMap e;
    e.pixels = img;
    e.technique = Technique::add;
    e.source_method = sal.method_id;
    for (int ch = 0; ch < img.c; ++ch)
        for (int i = 0; i < img.h; ++i)
            for (int j = 0; j < img.w; ++j)
                e.pixels.at(ch, i, j) = clamp01(img.at(ch, i, j) + sal.values.at(i, j));
    return e;
}

inline ExplanationMap integrate_nsm(const Image& img, const SaliencyMap& sal,
                                    const SamplingConfig& cfg) {
    detail::check_dims(img, sal);
    const Grid n = detail::sample_normal_field(sal, cfg);
    ExplanationMap e;
    e.pixels = img;
    e.technique = Technique::nsm;
    e.source_method = sal.method_id;
    for (int ch = 0; ch < img.c; ++ch)
        for (int i = 0; i < img.h; ++i)
            for (int j = 0; j < img.w; ++j)
                e.pixels.at(ch, i, j) = clamp01(img.at(ch, i, j) * n.at(i, j));
    return e;
}

inline ExplanationMap integrate_nsa(const Image& img, const SaliencyMap& sal,
                                    const SamplingConfig& cfg) {
    detail::check_dims(img, sal);
    const Grid n = detail::sample_normal_field(sal, cfg);
    ExplanationMap e;
    e.pixels = img;
    e.technique = Technique::nsa;
    e.source_method = sal.method_id;
    for (int ch = 0; ch < img.c; ++ch)
        for (int i = 0; i < img.h; ++i)
            for (int j = 0; j < img.w; ++j)
                e.pixels.at(ch, i, j) = clamp01(img.at(ch, i, j) + n.at(i, j));
    return e;
}

inline ExplanationMap integrate(Technique t, const Image& img, const SaliencyMap& sal,
                                const SamplingConfig& cfg = {}) {
    switch (t) {
        case Technique::mul: return integrate_mul(img, sal);
        case Technique::add: return integrate_add(img, sal);
        case Technique::nsm: return integrate_nsm(img, sal, cfg);
        case Technique::nsa: return integrate_nsa(img, sal, cfg);
    }
    throw std::invalid_argument("integrate: bad technique");
}

}  // namespace xaieval
