#pragma once
// Minimal CNN building blocks: C×H×W tensors, conv via im2col + GEMM,
// 2x2 max pooling, nearest-neighbour upsampling, channel concat, per-pixel
// softmax cross-entropy, and Adam. Single image per step, float storage,
// double accumulation for losses.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "xaieval/rng.hpp"
#include "xaieval/types.hpp"

namespace xaieval {

struct Tensor3 {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_, float fill = 0.0f)
        : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    float& at(int ch, int i, int j) {
        return v[(static_cast<std::size_t>(ch) * h + i) * w + j];
    }
    float at(int ch, int i, int j) const {
        return v[(static_cast<std::size_t>(ch) * h + i) * w + j];
    }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor3& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline Tensor3 tensor_from_image(const Image& img) {
    Tensor3 t(img.c, img.h, img.w);
    t.v = img.v;
    return t;
}

namespace nn {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

struct ConvParams {
    int in_c = 0;
    int out_c = 0;
    int k = 3;
    int pad = 1;
    std::vector<float> W;  // out_c × (in_c·k²), row-major
    std::vector<float> b;  // out_c

    void init(Rng& rng) {
        W.resize(static_cast<std::size_t>(out_c) * in_c * k * k);
        b.assign(out_c, 0.0f);
        const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
        for (auto& w : W) w = static_cast<float>(rng.normal(0.0, std_dev));
    }
};

struct ConvGrads {
    std::vector<float> dW;
    std::vector<float> db;

    void resize_like(const ConvParams& p) {
        dW.assign(p.W.size(), 0.0f);
        db.assign(p.b.size(), 0.0f);
    }
};

// Scratch column buffer reused across conv calls to avoid reallocation.
struct ConvScratch {
    Eigen::MatrixXf cols;  // (in_c·k²) × (h·w), column-major
};

inline void im2col(const Tensor3& x, int k, int pad, Eigen::MatrixXf& cols) {
    const int hw = x.h * x.w;
    cols.resize(x.c * k * k, hw);
    for (int i = 0; i < x.h; ++i) {
        for (int j = 0; j < x.w; ++j) {
            const int col = i * x.w + j;
            float* dst = cols.data() + static_cast<std::size_t>(col) * cols.rows();
            int r = 0;
            for (int ch = 0; ch < x.c; ++ch) {
                for (int di = 0; di < k; ++di) {
                    const int y = i + di - pad;
                    const bool row_ok = y >= 0 && y < x.h;
                    for (int dj = 0; dj < k; ++dj, ++r) {
                        const int xx = j + dj - pad;
                        dst[r] = (row_ok && xx >= 0 && xx < x.w) ? x.at(ch, y, xx) : 0.0f;
                    }
                }
            }
        }
    }
}

inline void col2im_accumulate(const Eigen::MatrixXf& cols, int k, int pad, Tensor3& dx) {
    for (int i = 0; i < dx.h; ++i) {
        for (int j = 0; j < dx.w; ++j) {
            const int col = i * dx.w + j;
            const float* src = cols.data() + static_cast<std::size_t>(col) * cols.rows();
            int r = 0;
            for (int ch = 0; ch < dx.c; ++ch) {
                for (int di = 0; di < k; ++di) {
                    const int y = i + di - pad;
                    const bool row_ok = y >= 0 && y < dx.h;
                    for (int dj = 0; dj < k; ++dj, ++r) {
                        const int xx = j + dj - pad;
                        if (row_ok && xx >= 0 && xx < dx.w) dx.at(ch, y, xx) += src[r];
                    }
                }
            }
        }
    }
}

inline Tensor3 conv_forward(const ConvParams& p, const Tensor3& x, ConvScratch& scratch) {
    if (x.c != p.in_c) throw std::invalid_argument("conv: channel mismatch");
    im2col(x, p.k, p.pad, scratch.cols);
    Tensor3 y(p.out_c, x.h, x.w);
    CMapRM Wm(p.W.data(), p.out_c, p.in_c * p.k * p.k);
    MapRM ym(y.v.data(), p.out_c, x.h * x.w);
    ym.noalias() = Wm * scratch.cols;
    for (int oc = 0; oc < p.out_c; ++oc) ym.row(oc).array() += p.b[oc];
    return y;
}

// dy is the gradient at the conv output. When grads == nullptr the parameter
// gradients are skipped (frozen model); when dx == nullptr the input gradient
// is skipped (first layer).
inline void conv_backward(const ConvParams& p, const Tensor3& x, const Tensor3& dy,
                          ConvScratch& scratch, ConvGrads* grads, Tensor3* dx) {
    const int hw = x.h * x.w;
    im2col(x, p.k, p.pad, scratch.cols);
    CMapRM dym(dy.v.data(), p.out_c, hw);
    if (grads) {
        MapRM dWm(grads->dW.data(), p.out_c, p.in_c * p.k * p.k);
        dWm.noalias() += dym * scratch.cols.transpose();
        for (int oc = 0; oc < p.out_c; ++oc) grads->db[oc] += dym.row(oc).sum();
    }
    if (dx) {
        CMapRM Wm(p.W.data(), p.out_c, p.in_c * p.k * p.k);
        Eigen::MatrixXf dcols = Wm.transpose() * dym;
        *dx = Tensor3(x.c, x.h, x.w);
        col2im_accumulate(dcols, p.k, p.pad, *dx);
    }
}

inline Tensor3 relu(const Tensor3& x) {
    Tensor3 y = x;
    for (auto& v : y.v) v = v > 0.0f ? v : 0.0f;
    return y;
}

// Uses the cached forward output y to gate the gradient.
inline Tensor3 relu_backward(const Tensor3& y, const Tensor3& dy) {
    Tensor3 dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i)
        if (y.v[i] <= 0.0f) dx.v[i] = 0.0f;
    return dx;
}

struct PoolCache {
    std::vector<std::int32_t> argmax;  // flat input index per output element
};

inline Tensor3 maxpool2_forward(const Tensor3& x, PoolCache& cache) {
    if (x.h % 2 != 0 || x.w % 2 != 0)
        throw std::invalid_argument("maxpool2: dims must be even");
    Tensor3 y(x.c, x.h / 2, x.w / 2);
    cache.argmax.resize(y.size());
    for (int ch = 0; ch < x.c; ++ch) {
        for (int i = 0; i < y.h; ++i) {
            for (int j = 0; j < y.w; ++j) {
                float best = -1e30f;
                std::int32_t best_idx = 0;
                for (int di = 0; di < 2; ++di) {
                    for (int dj = 0; dj < 2; ++dj) {
                        const int yy = 2 * i + di, xx = 2 * j + dj;
                        const float v = x.at(ch, yy, xx);
                        if (v > best) {
                            best = v;
                            best_idx = static_cast<std::int32_t>(
                                (static_cast<std::size_t>(ch) * x.h + yy) * x.w + xx);
                        }
                    }
                }
                y.at(ch, i, j) = best;
                cache.argmax[(static_cast<std::size_t>(ch) * y.h + i) * y.w + j] = best_idx;
            }
        }
    }
    return y;
}

inline Tensor3 maxpool2_backward(const Tensor3& dy, const PoolCache& cache, int in_h, int in_w) {
    Tensor3 dx(dy.c, in_h, in_w);
    for (std::size_t o = 0; o < dy.v.size(); ++o)
        dx.v[static_cast<std::size_t>(cache.argmax[o])] += dy.v[o];
    return dx;
}

inline Tensor3 upsample2_forward(const Tensor3& x) {
    Tensor3 y(x.c, x.h * 2, x.w * 2);
    for (int ch = 0; ch < x.c; ++ch)
        for (int i = 0; i < y.h; ++i)
            for (int j = 0; j < y.w; ++j) y.at(ch, i, j) = x.at(ch, i / 2, j / 2);
    return y;
}

inline Tensor3 upsample2_backward(const Tensor3& dy) {
    Tensor3 dx(dy.c, dy.h / 2, dy.w / 2);
    for (int ch = 0; ch < dy.c; ++ch)
        for (int i = 0; i < dy.h; ++i)
            for (int j = 0; j < dy.w; ++j) dx.at(ch, i / 2, j / 2) += dy.at(ch, i, j);
    return dx;
}

inline Tensor3 concat_channels(const Tensor3& a, const Tensor3& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("concat: spatial mismatch");
    Tensor3 y(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + a.v.size());
    return y;
}

inline void split_channels(const Tensor3& dy, int c_a, Tensor3& da, Tensor3& db) {
    da = Tensor3(c_a, dy.h, dy.w);
    db = Tensor3(dy.c - c_a, dy.h, dy.w);
    std::copy(dy.v.begin(), dy.v.begin() + da.v.size(), da.v.begin());
    std::copy(dy.v.begin() + da.v.size(), dy.v.end(), db.v.begin());
}

// Per-pixel softmax over the channel axis.
inline Tensor3 softmax_channels(const Tensor3& logits) {
    Tensor3 p(logits.c, logits.h, logits.w);
    for (int i = 0; i < logits.h; ++i) {
        for (int j = 0; j < logits.w; ++j) {
            float mx = logits.at(0, i, j);
            for (int ch = 1; ch < logits.c; ++ch) mx = std::max(mx, logits.at(ch, i, j));
            double denom = 0.0;
            for (int ch = 0; ch < logits.c; ++ch)
                denom += std::exp(static_cast<double>(logits.at(ch, i, j) - mx));
            for (int ch = 0; ch < logits.c; ++ch)
                p.at(ch, i, j) = static_cast<float>(
                    std::exp(static_cast<double>(logits.at(ch, i, j) - mx)) / denom);
        }
    }
    return p;
}

// Mean per-pixel cross-entropy of softmax(probs) against integer labels.
inline double cross_entropy_loss(const Tensor3& probs, const SegMask& labels) {
    double loss = 0.0;
    const double eps = 1e-12;
    for (int i = 0; i < probs.h; ++i)
        for (int j = 0; j < probs.w; ++j)
            loss -= std::log(static_cast<double>(probs.at(labels.at(i, j), i, j)) + eps);
    return loss / (static_cast<double>(probs.h) * probs.w);
}

// Gradient of the mean cross-entropy w.r.t. the logits: (p - onehot)/npix.
inline Tensor3 cross_entropy_backward(const Tensor3& probs, const SegMask& labels) {
    Tensor3 d = probs;
    const float inv = 1.0f / (static_cast<float>(probs.h) * probs.w);
    for (int i = 0; i < probs.h; ++i) {
        for (int j = 0; j < probs.w; ++j) {
            d.at(labels.at(i, j), i, j) -= 1.0f;
            for (int ch = 0; ch < probs.c; ++ch) d.at(ch, i, j) *= inv;
        }
    }
    return d;
}

inline float sigmoidf(float x) {
    return x >= 0.0f ? 1.0f / (1.0f + std::exp(-x))
                     : std::exp(x) / (1.0f + std::exp(x));
}

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::int64_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init(std::size_t n, double lr_) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
        step = 0;
        lr = lr_;
    }
};

inline void adam_step(float* params, const float* grads, std::size_t n, AdamState& st,
                      std::size_t offset) {
    const double t = static_cast<double>(st.step);
    const double bc1 = 1.0 - std::pow(st.beta1, t);
    const double bc2 = 1.0 - std::pow(st.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = offset + i;
        const double g = grads[i];
        st.m[s] = static_cast<float>(st.beta1 * st.m[s] + (1.0 - st.beta1) * g);
        st.v[s] = static_cast<float>(st.beta2 * st.v[s] + (1.0 - st.beta2) * g * g);
        const double mhat = st.m[s] / bc1;
        const double vhat = st.v[s] / bc2;
        params[i] -= static_cast<float>(st.lr * mhat / (std::sqrt(vhat) + st.eps));
    }
}

}  // namespace nn
}  // namespace xaieval
