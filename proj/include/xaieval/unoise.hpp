#pragma once
// Trainable noise model: a small encoder-decoder that emits per-pixel noise
// magnitudes O in (0,1). Training maximises injected noise while keeping the
// frozen utility model's predictions on noised inputs close to its clean
// predictions; at evaluation time the mask absorbed by an explanation map
// scores the underlying XAI method (lower is better).

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "xaieval/dataset.hpp"
#include "xaieval/errors.hpp"
#include "xaieval/integrate.hpp"
#include "xaieval/nn.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/seg_model.hpp"
#include "xaieval/types.hpp"
#include "xaieval/unet.hpp"

namespace xaieval {

struct NoiseTrainConfig {
    double lambda = 0.1;       // weight of the mean-noise reward
    double noise_scale = 0.5;  // s in x + s·O⊙ε
    int epochs = 10;
    std::uint64_t seed = 0;
    double lr = 2e-3;
    int base_channels = 8;
    int target_class = 1;
    double max_iou_drop = 0.05;
    double min_mean_noise = 0.2;
};

// x̃ = clamp(x + s·O⊙ε, 0, 1) with per-pixel standard-normal ε, drawn
// per channel in plane order. Deterministic given the seed.
inline Image apply_noise(const Image& x, const Grid& noise, double scale,
                         std::uint64_t seed) {
    if (noise.h != x.h || noise.w != x.w)
        throw std::invalid_argument("apply_noise: mask dims mismatch");
    Rng rng(seed);
    Image out = x;
    for (int ch = 0; ch < x.c; ++ch)
        for (int i = 0; i < x.h; ++i)
            for (int j = 0; j < x.w; ++j) {
                const double eps = rng.normal();
                out.at(ch, i, j) = clamp01(static_cast<float>(
                    x.at(ch, i, j) + scale * noise.at(i, j) * eps));
            }
    return out;
}

class NoiseModel {
public:
    NoiseModel() = default;
    explicit NoiseModel(UNet net) : net_(std::move(net)) {
        if (net_.config().out_c != 1)
            throw std::invalid_argument("NoiseModel: expects a single-channel head");
    }

    // Deterministic forward pass; sigmoid keeps the output strictly in (0,1).
    Grid infer(const Image& img) const {
        UNetCache cc;
        const Tensor3& logits = net_.forward(tensor_from_image(img), cc);
        Grid o(img.h, img.w);
        for (std::size_t i = 0; i < o.v.size(); ++i) o.v[i] = nn::sigmoidf(logits.v[i]);
        return o;
    }

    UNet& net() { return net_; }
    const UNet& net() const { return net_; }
    void save(const std::string& path) const { net_.save(path); }
    static NoiseModel load(const std::string& path) { return NoiseModel(UNet::load(path)); }

private:
    UNet net_;
};

// Inference arm of the evaluation pipeline.
inline NoiseMask noise_mask(const NoiseModel& nm, const ExplanationMap& expl) {
    NoiseMask out;
    out.values = nm.infer(expl.pixels);
    out.source_id = expl.source_method;
    return out;
}

struct NoiseTrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_mean_noise;
    double clean_iou = 0.0;
    double noised_iou = 0.0;
    double iou_drop = 0.0;
    double mean_noise_val = 0.0;
    double lambda = 0.0;
    double noise_scale = 0.0;

    std::string pareto_json() const {
        std::ostringstream os;
        os << "{\"epoch_loss\":[";
        for (std::size_t i = 0; i < epoch_loss.size(); ++i)
            os << (i ? "," : "") << epoch_loss[i];
        os << "],\"epoch_mean_noise\":[";
        for (std::size_t i = 0; i < epoch_mean_noise.size(); ++i)
            os << (i ? "," : "") << epoch_mean_noise[i];
        os << "],\"clean_iou\":" << clean_iou << ",\"noised_iou\":" << noised_iou
           << ",\"iou_drop\":" << iou_drop << ",\"mean_noise_val\":" << mean_noise_val
           << "}";
        return os.str();
    }
};

namespace detail {

inline double mean_of(const std::vector<float>& v) {
    double acc = 0.0;
    for (float x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace detail

// Trains the noise model against a frozen utility model. The training target
// is the utility model's own clean argmax prediction, not the ground truth.
// Throws TrainingFloorError with the (IoU drop, mean noise) trace when either
// floor is missed.
inline NoiseModel train_unoise(const UnetSegModel& utility, const Dataset& ds,
                               const NoiseTrainConfig& cfg,
                               NoiseTrainReport* report_out = nullptr) {
    if (cfg.lambda < 0.0) throw std::invalid_argument("train_unoise: lambda must be >= 0");
    if (cfg.noise_scale <= 0.0)
        throw std::invalid_argument("train_unoise: noise_scale must be > 0");
    if (ds.train.empty()) throw std::invalid_argument("train_unoise: empty dataset");

    const int h = ds.train.front().image.h;
    const int w = ds.train.front().image.w;
    const double s = cfg.noise_scale;

    UNetConfig ncfg;
    ncfg.in_c = ds.train.front().image.c;
    ncfg.base_c = cfg.base_channels;
    ncfg.out_c = 1;
    ncfg.init_seed = derive_seed(cfg.seed, 0xB055);
    NoiseModel model{UNet(ncfg)};

    // Clean pseudo-labels never change while the utility model is frozen.
    std::vector<SegMask> pseudo;
    pseudo.reserve(ds.train.size());
    for (const auto& item : ds.train)
        pseudo.push_back(argmax_labels(utility.predict(item.image)));

    nn::AdamState adam;
    adam.init(model.net().num_params(), cfg.lr);
    UNetGrads ngrads;

    NoiseTrainReport report;
    report.lambda = cfg.lambda;
    report.noise_scale = s;

    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuf(derive_seed(cfg.seed, 0x0D0));
    std::uint64_t step = 0;

    const float inv_uv = 1.0f / static_cast<float>(h * w);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuf.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0, noise_sum = 0.0;
        for (std::size_t idx : order) {
            const DataItem& item = ds.train[idx];
            const Tensor3 x = tensor_from_image(item.image);

            // Noise forward.
            UNetCache ncc;
            const Tensor3& nlogits = model.net().forward(x, ncc);
            Grid o(h, w);
            for (std::size_t p = 0; p < o.v.size(); ++p)
                o.v[p] = nn::sigmoidf(nlogits.v[p]);

            // Inject noise.
            const std::uint64_t eps_seed = derive_seed(cfg.seed, 0xE9 + step);
            Rng eps_rng(eps_seed);
            Tensor3 eps(x.c, h, w);
            for (auto& e : eps.v) e = static_cast<float>(eps_rng.normal());
            Tensor3 noised = x;
            std::vector<bool> in_range(noised.v.size());
            for (int ch = 0; ch < x.c; ++ch) {
                for (int p = 0; p < h * w; ++p) {
                    const std::size_t id = static_cast<std::size_t>(ch) * h * w + p;
                    const float u = x.v[id] + static_cast<float>(s) * o.v[static_cast<std::size_t>(p)] * eps.v[id];
                    in_range[id] = u > 0.0f && u < 1.0f;
                    noised.v[id] = clamp01(u);
                }
            }

            // Utility forward on the noised input; frozen, so only dx is needed.
            UNetCache ucc;
            const Tensor3& ulogits = utility.net().forward(noised, ucc);
            const Tensor3 uprobs = nn::softmax_channels(ulogits);
            const double ce = nn::cross_entropy_loss(uprobs, pseudo[idx]);
            const Tensor3 dulogits = nn::cross_entropy_backward(uprobs, pseudo[idx]);
            BackwardOptions uopt;
            uopt.want_dx = true;
            uopt.want_param_grads = false;
            const Tensor3 dnoised = utility.net().backward(ucc, dulogits, nullptr, uopt).dx;

            // dL/dO = Σ_ch s·ε·dx̃ (inside the clamp) − λ/(uv), then through
            // the sigmoid.
            const double mean_o = detail::mean_of(o.v);
            Tensor3 dnlogits(1, h, w, 0.0f);
            for (int p = 0; p < h * w; ++p) {
                float docc = -static_cast<float>(cfg.lambda) * inv_uv;
                for (int ch = 0; ch < x.c; ++ch) {
                    const std::size_t id = static_cast<std::size_t>(ch) * h * w + p;
                    if (in_range[id])
                        docc += static_cast<float>(s) * eps.v[id] * dnoised.v[id];
                }
                const float ov = o.v[static_cast<std::size_t>(p)];
                dnlogits.v[static_cast<std::size_t>(p)] = docc * ov * (1.0f - ov);
            }

            model.net().zero_grads(ngrads);
            model.net().backward(ncc, dnlogits, &ngrads, {});
            model.net().adam_update(ngrads, adam);

            loss_sum += ce - cfg.lambda * mean_o;
            noise_sum += mean_o;
            ++step;
        }
        report.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
        report.epoch_mean_noise.push_back(noise_sum / static_cast<double>(order.size()));
    }

    // Validation floors.
    const auto& val = ds.val.empty() ? ds.train : ds.val;
    double clean_acc = 0.0, noised_acc = 0.0, mean_noise = 0.0;
    std::uint64_t eval_idx = 0;
    for (const auto& item : val) {
        const SegMask clean_pred = argmax_labels(utility.predict(item.image));
        clean_acc += iou_for_class(clean_pred, item.mask, cfg.target_class);
        const Grid o = model.infer(item.image);
        mean_noise += detail::mean_of(o.v);
        const Image noised =
            apply_noise(item.image, o, s, derive_seed(cfg.seed, 0xEA7 + eval_idx));
        noised_acc += iou_for_class(argmax_labels(utility.predict(noised)), item.mask,
                                    cfg.target_class);
        ++eval_idx;
    }
    const double nval = static_cast<double>(val.size());
    report.clean_iou = clean_acc / nval;
    report.noised_iou = noised_acc / nval;
    report.iou_drop = report.clean_iou - report.noised_iou;
    report.mean_noise_val = mean_noise / nval;
    if (report_out) *report_out = report;

    if (report.iou_drop > cfg.max_iou_drop || report.mean_noise_val < cfg.min_mean_noise) {
        std::ostringstream msg;
        msg << "train_unoise: floors unmet (iou_drop=" << report.iou_drop
            << " max=" << cfg.max_iou_drop << ", mean_noise=" << report.mean_noise_val
            << " min=" << cfg.min_mean_noise << ")";
        throw TrainingFloorError(msg.str(), report.pareto_json());
    }
    return model;
}

}  // namespace xaieval
