#pragma once
// Segmentation model contracts and the utility-model training loop.
//
// SegModel is the black-box surface (predict only) consumed by perturbation
// methods; WhiteBoxSegModel adds activation/gradient access for the CAM
// methods. predict() is const and thread-safe; the white-box calls are
// stateful and must not be shared across threads.

#include <atomic>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "xaieval/dataset.hpp"
#include "xaieval/errors.hpp"
#include "xaieval/nn.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/types.hpp"
#include "xaieval/unet.hpp"

namespace xaieval {

class SegModel {
public:
    virtual ~SegModel() = default;
    virtual ProbMask predict(const Image& img) const = 0;
    virtual int num_classes() const = 0;

    // Scores many inputs, optionally across threads. Output order matches the
    // input order regardless of jobs, so downstream reductions stay
    // deterministic.
    virtual std::vector<ProbMask> predict_batch(const std::vector<Image>& imgs,
                                                int jobs = 1) const {
        std::vector<ProbMask> out(imgs.size());
        if (jobs <= 1 || imgs.size() < 2) {
            for (std::size_t i = 0; i < imgs.size(); ++i) out[i] = predict(imgs[i]);
            return out;
        }
        const int nthreads = std::min<int>(jobs, static_cast<int>(imgs.size()));
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < nthreads; ++t) {
            pool.emplace_back([&]() {
                for (std::size_t i = next.fetch_add(1); i < imgs.size();
                     i = next.fetch_add(1))
                    out[i] = predict(imgs[i]);
            });
        }
        for (auto& th : pool) th.join();
        return out;
    }
};

class WhiteBoxSegModel : public SegModel {
public:
    virtual std::vector<std::string> activation_layers() const = 0;

    // Runs a forward pass, returning logits and the activation at `layer`.
    // State is retained for the matching grad_at_layer call.
    virtual void forward_white(const Image& img, const std::string& layer,
                               Tensor3& logits, Tensor3& activation) = 0;

    // Backpropagates dlogits from the last forward_white down to the
    // requested layer and returns the gradient at its activation.
    virtual Tensor3 grad_at_layer(const Tensor3& dlogits) = 0;
};

class UnetSegModel : public WhiteBoxSegModel {
public:
    UnetSegModel() = default;
    explicit UnetSegModel(UNet net) : net_(std::move(net)) {}

    ProbMask predict(const Image& img) const override {
        UNetCache cc;
        const Tensor3& logits = net_.forward(tensor_from_image(img), cc);
        Tensor3 probs = nn::softmax_channels(logits);
        ProbMask pm;
        pm.k = probs.c;
        pm.h = probs.h;
        pm.w = probs.w;
        pm.v = std::move(probs.v);
        return pm;
    }

    int num_classes() const override { return net_.config().out_c; }

    std::vector<std::string> activation_layers() const override {
        return UNet::layer_names();
    }

    void forward_white(const Image& img, const std::string& layer, Tensor3& logits,
                       Tensor3& activation) override {
        net_.activation(white_cache_, layer.empty() ? "bottleneck" : layer);  // validate name early
        white_layer_ = layer;
        net_.forward(tensor_from_image(img), white_cache_);
        logits = white_cache_.logits;
        activation = net_.activation(white_cache_, white_layer_);
    }

    Tensor3 grad_at_layer(const Tensor3& dlogits) override {
        BackwardOptions opt;
        opt.want_dx = false;
        opt.want_param_grads = false;
        opt.capture_layer = white_layer_;
        return net_.backward(white_cache_, dlogits, nullptr, opt).captured;
    }

    UNet& net() { return net_; }
    const UNet& net() const { return net_; }

    void save(const std::string& path) const { net_.save(path); }
    static UnetSegModel load(const std::string& path) {
        return UnetSegModel(UNet::load(path));
    }

private:
    UNet net_;
    UNetCache white_cache_;
    std::string white_layer_ = "bottleneck";
};

inline SegMask argmax_labels(const ProbMask& pm) {
    SegMask m;
    m.h = pm.h;
    m.w = pm.w;
    m.num_classes = pm.k;
    m.labels.resize(static_cast<std::size_t>(pm.h) * pm.w);
    for (int i = 0; i < pm.h; ++i) {
        for (int j = 0; j < pm.w; ++j) {
            int best = 0;
            float bv = pm.at(0, i, j);
            for (int c = 1; c < pm.k; ++c)
                if (pm.at(c, i, j) > bv) { bv = pm.at(c, i, j); best = c; }
            m.labels[static_cast<std::size_t>(i) * pm.w + j] = best;
        }
    }
    return m;
}

// Intersection-over-union of {label == cls} between prediction and truth.
// Both empty counts as a perfect match.
inline double iou_for_class(const SegMask& pred, const SegMask& truth, int cls) {
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) {
        const bool p = pred.labels[i] == cls;
        const bool t = truth.labels[i] == cls;
        inter += (p && t);
        uni += (p || t);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mean_target_iou(const SegModel& model, const std::vector<DataItem>& items,
                              int target_class) {
    double acc = 0.0;
    for (const auto& it : items)
        acc += iou_for_class(argmax_labels(model.predict(it.image)), it.mask, target_class);
    return items.empty() ? 0.0 : acc / static_cast<double>(items.size());
}

struct UtilityTrainOptions {
    double lr = 2e-3;
    int base_channels = 8;
    int target_class = 1;
    double iou_floor = 0.85;
    // Gaussian input-noise augmentation (per step, sd ~ U[0, max]). Keeps the
    // model's predictions stable under moderate noise, which the downstream
    // noise-model training relies on.
    double noise_aug_max_sd = 0.2;
};

struct UtilityTrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_val_iou;
    double val_iou = 0.0;
    std::uint64_t seed = 0;
    int epochs = 0;
    std::string dataset_hash;

    std::string curve_json() const {
        std::ostringstream os;
        os << "{\"epoch_loss\":[";
        for (std::size_t i = 0; i < epoch_loss.size(); ++i)
            os << (i ? "," : "") << epoch_loss[i];
        os << "],\"epoch_val_iou\":[";
        for (std::size_t i = 0; i < epoch_val_iou.size(); ++i)
            os << (i ? "," : "") << epoch_val_iou[i];
        os << "],\"final_val_iou\":" << val_iou << "}";
        return os.str();
    }
};

// Trains the utility segmentation model. Deterministic for a fixed seed.
// Throws TrainingFloorError with the training curve when the validation IoU
// floor is not reached.
inline UnetSegModel train_utility(const Dataset& ds, int epochs, std::uint64_t seed,
                                  const UtilityTrainOptions& opt = {},
                                  UtilityTrainReport* report_out = nullptr) {
    if (ds.train.size() < 100)
        throw std::invalid_argument("train_utility: need >= 100 training items");

    UNetConfig cfg;
    cfg.in_c = ds.train.front().image.c;
    cfg.base_c = opt.base_channels;
    cfg.out_c = ds.num_classes;
    cfg.init_seed = derive_seed(seed, 0xA11);
    UNet net(cfg);

    nn::AdamState adam;
    adam.init(net.num_params(), opt.lr);
    UNetGrads grads;

    UtilityTrainReport report;
    report.seed = seed;
    report.epochs = epochs;
    report.dataset_hash = dataset_hash_hex(ds);

    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    UnetSegModel model(std::move(net));
    Rng shuf(derive_seed(seed, 0x5EED));
    Rng aug(derive_seed(seed, 0xA06));
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the run RNG keeps the order reproducible.
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(shuf.uniform_int(0, static_cast<int>(i) - 1));
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        for (std::size_t idx : order) {
            const DataItem& item = ds.train[idx];
            Tensor3 x = tensor_from_image(item.image);
            if (opt.noise_aug_max_sd > 0.0) {
                const double sd = aug.uniform(0.0, opt.noise_aug_max_sd);
                for (auto& v : x.v)
                    v = std::min(1.0f, std::max(0.0f, v + static_cast<float>(sd * aug.normal())));
            }
            UNetCache cc;
            const Tensor3& logits = model.net().forward(x, cc);
            Tensor3 probs = nn::softmax_channels(logits);
            loss_sum += nn::cross_entropy_loss(probs, item.mask);
            Tensor3 dlogits = nn::cross_entropy_backward(probs, item.mask);
            model.net().zero_grads(grads);
            BackwardOptions bo;
            bo.want_dx = false;
            model.net().backward(cc, dlogits, &grads, bo);
            model.net().adam_update(grads, adam);
        }
        report.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
        report.epoch_val_iou.push_back(mean_target_iou(model, ds.val, opt.target_class));
    }

    report.val_iou = report.epoch_val_iou.empty()
                         ? mean_target_iou(model, ds.val, opt.target_class)
                         : report.epoch_val_iou.back();
    if (report_out) *report_out = report;
    if (report.val_iou < opt.iou_floor) {
        std::ostringstream msg;
        msg << "train_utility: validation IoU " << report.val_iou << " below floor "
            << opt.iou_floor;
        throw TrainingFloorError(msg.str(), report.curve_json());
    }
    return model;
}

}  // namespace xaieval
