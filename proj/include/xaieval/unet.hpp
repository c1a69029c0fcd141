#pragma once
// Three-level encoder-decoder with skip connections. Emits raw logits; the
// owning model applies softmax or sigmoid. Forward passes write all
// intermediates into an explicit cache so that const forwards are thread-safe
// and backward passes can start from any cached state.

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "xaieval/nn.hpp"

namespace xaieval {

struct UNetConfig {
    int in_c = 1;
    int base_c = 8;
    int out_c = 2;
    std::uint64_t init_seed = 1;
};

struct UNetCache {
    Tensor3 x;
    Tensor3 a1, a2;        // enc1 block (post-ReLU)
    Tensor3 p1, a3, a4;    // enc2 block
    Tensor3 p2, a5, a6;    // bottleneck block
    Tensor3 c2, a7, a8;    // dec2 block
    Tensor3 c1, a9, a10;   // dec1 block
    Tensor3 logits;
    nn::PoolCache pool1, pool2;
};

struct UNetGrads {
    std::array<nn::ConvGrads, 11> conv;
};

struct BackwardOptions {
    bool want_dx = false;
    bool want_param_grads = true;
    std::string capture_layer;  // empty = no capture
};

struct BackwardResult {
    Tensor3 dx;        // valid when want_dx
    Tensor3 captured;  // gradient at capture_layer (post-ReLU activation)
};

class UNet {
public:
    UNet() = default;

    explicit UNet(const UNetConfig& cfg) : cfg_(cfg) {
        Rng rng(cfg.init_seed);
        const int b = cfg.base_c;
        auto mk = [&rng](nn::ConvParams& p, int in, int out, int k) {
            p.in_c = in;
            p.out_c = out;
            p.k = k;
            p.pad = k / 2;
            p.init(rng);
        };
        mk(conv_[0], cfg.in_c, b, 3);       // e1a
        mk(conv_[1], b, b, 3);              // e1b
        mk(conv_[2], b, 2 * b, 3);          // e2a
        mk(conv_[3], 2 * b, 2 * b, 3);      // e2b
        mk(conv_[4], 2 * b, 4 * b, 3);      // bot a
        mk(conv_[5], 4 * b, 4 * b, 3);      // bot b
        mk(conv_[6], 6 * b, 2 * b, 3);      // d2a (4b up + 2b skip)
        mk(conv_[7], 2 * b, 2 * b, 3);      // d2b
        mk(conv_[8], 3 * b, b, 3);          // d1a (2b up + b skip)
        mk(conv_[9], b, b, 3);              // d1b
        mk(conv_[10], b, cfg.out_c, 1);     // head
    }

    const UNetConfig& config() const { return cfg_; }

    static const std::vector<std::string>& layer_names() {
        static const std::vector<std::string> names = {"enc1", "enc2", "bottleneck",
                                                       "dec2", "dec1"};
        return names;
    }

    std::size_t num_params() const {
        std::size_t n = 0;
        for (const auto& c : conv_) n += c.W.size() + c.b.size();
        return n;
    }

    // Input spatial dims must be multiples of 4 (two pooling stages).
    const Tensor3& forward(const Tensor3& x, UNetCache& cc) const {
        if (x.c != cfg_.in_c) throw std::invalid_argument("unet: input channel mismatch");
        if (x.h % 4 != 0 || x.w % 4 != 0)
            throw std::invalid_argument("unet: input dims must be multiples of 4");
        nn::ConvScratch ws;
        cc.x = x;
        cc.a1 = nn::relu(nn::conv_forward(conv_[0], cc.x, ws));
        cc.a2 = nn::relu(nn::conv_forward(conv_[1], cc.a1, ws));
        cc.p1 = nn::maxpool2_forward(cc.a2, cc.pool1);
        cc.a3 = nn::relu(nn::conv_forward(conv_[2], cc.p1, ws));
        cc.a4 = nn::relu(nn::conv_forward(conv_[3], cc.a3, ws));
        cc.p2 = nn::maxpool2_forward(cc.a4, cc.pool2);
        cc.a5 = nn::relu(nn::conv_forward(conv_[4], cc.p2, ws));
        cc.a6 = nn::relu(nn::conv_forward(conv_[5], cc.a5, ws));
        cc.c2 = nn::concat_channels(nn::upsample2_forward(cc.a6), cc.a4);
        cc.a7 = nn::relu(nn::conv_forward(conv_[6], cc.c2, ws));
        cc.a8 = nn::relu(nn::conv_forward(conv_[7], cc.a7, ws));
        cc.c1 = nn::concat_channels(nn::upsample2_forward(cc.a8), cc.a2);
        cc.a9 = nn::relu(nn::conv_forward(conv_[8], cc.c1, ws));
        cc.a10 = nn::relu(nn::conv_forward(conv_[9], cc.a9, ws));
        cc.logits = nn::conv_forward(conv_[10], cc.a10, ws);
        return cc.logits;
    }

    const Tensor3& activation(const UNetCache& cc, const std::string& layer) const {
        if (layer == "enc1") return cc.a2;
        if (layer == "enc2") return cc.a4;
        if (layer == "bottleneck") return cc.a6;
        if (layer == "dec2") return cc.a8;
        if (layer == "dec1") return cc.a10;
        throw std::invalid_argument("unet: unknown layer '" + layer + "'");
    }

    BackwardResult backward(const UNetCache& cc, const Tensor3& dlogits,
                            UNetGrads* grads, const BackwardOptions& opt) const {
        if (!dlogits.same_shape(cc.logits))
            throw std::invalid_argument("unet: dlogits shape mismatch");
        nn::ConvScratch ws;
        BackwardResult out;
        auto capture = [&](const char* name, const Tensor3& g) {
            if (!opt.capture_layer.empty() && opt.capture_layer == name) out.captured = g;
        };
        auto g = [&](int idx) -> nn::ConvGrads* {
            if (!grads || !opt.want_param_grads) return nullptr;
            return &grads->conv[static_cast<std::size_t>(idx)];
        };

        Tensor3 d_a10;
        nn::conv_backward(conv_[10], cc.a10, dlogits, ws, g(10), &d_a10);
        capture("dec1", d_a10);

        Tensor3 d_a9;
        nn::conv_backward(conv_[9], cc.a9, nn::relu_backward(cc.a10, d_a10), ws, g(9), &d_a9);
        Tensor3 d_c1;
        nn::conv_backward(conv_[8], cc.c1, nn::relu_backward(cc.a9, d_a9), ws, g(8), &d_c1);

        Tensor3 d_u1, d_a2_skip;
        nn::split_channels(d_c1, cc.a8.c, d_u1, d_a2_skip);
        Tensor3 d_a8 = nn::upsample2_backward(d_u1);
        capture("dec2", d_a8);

        Tensor3 d_a7;
        nn::conv_backward(conv_[7], cc.a7, nn::relu_backward(cc.a8, d_a8), ws, g(7), &d_a7);
        Tensor3 d_c2;
        nn::conv_backward(conv_[6], cc.c2, nn::relu_backward(cc.a7, d_a7), ws, g(6), &d_c2);

        Tensor3 d_u2, d_a4_skip;
        nn::split_channels(d_c2, cc.a6.c, d_u2, d_a4_skip);
        Tensor3 d_a6 = nn::upsample2_backward(d_u2);
        capture("bottleneck", d_a6);

        Tensor3 d_a5;
        nn::conv_backward(conv_[5], cc.a5, nn::relu_backward(cc.a6, d_a6), ws, g(5), &d_a5);
        Tensor3 d_p2;
        nn::conv_backward(conv_[4], cc.p2, nn::relu_backward(cc.a5, d_a5), ws, g(4), &d_p2);

        Tensor3 d_a4 = nn::maxpool2_backward(d_p2, cc.pool2, cc.a4.h, cc.a4.w);
        for (std::size_t i = 0; i < d_a4.v.size(); ++i) d_a4.v[i] += d_a4_skip.v[i];
        capture("enc2", d_a4);

        Tensor3 d_a3;
        nn::conv_backward(conv_[3], cc.a3, nn::relu_backward(cc.a4, d_a4), ws, g(3), &d_a3);
        Tensor3 d_p1;
        nn::conv_backward(conv_[2], cc.p1, nn::relu_backward(cc.a3, d_a3), ws, g(2), &d_p1);

        Tensor3 d_a2 = nn::maxpool2_backward(d_p1, cc.pool1, cc.a2.h, cc.a2.w);
        for (std::size_t i = 0; i < d_a2.v.size(); ++i) d_a2.v[i] += d_a2_skip.v[i];
        capture("enc1", d_a2);

        Tensor3 d_a1;
        nn::conv_backward(conv_[1], cc.a1, nn::relu_backward(cc.a2, d_a2), ws, g(1), &d_a1);
        nn::conv_backward(conv_[0], cc.x, nn::relu_backward(cc.a1, d_a1), ws, g(0),
                          opt.want_dx ? &out.dx : nullptr);
        return out;
    }

    void zero_grads(UNetGrads& grads) const {
        for (std::size_t i = 0; i < conv_.size(); ++i)
            grads.conv[i].resize_like(conv_[i]);
    }

    // Applies Adam to all conv parameters using grads accumulated since the
    // last zero_grads.
    void adam_update(const UNetGrads& grads, nn::AdamState& st) {
        ++st.step;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < conv_.size(); ++i) {
            auto& p = conv_[i];
            nn::adam_step(p.W.data(), grads.conv[i].dW.data(), p.W.size(), st, offset);
            offset += p.W.size();
            nn::adam_step(p.b.data(), grads.conv[i].db.data(), p.b.size(), st, offset);
            offset += p.b.size();
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("unet: cannot write " + path);
        const char magic[8] = {'X', 'E', 'V', 'W', '1', 0, 0, 0};
        out.write(magic, 8);
        auto w32 = [&out](std::uint32_t x) { out.write(reinterpret_cast<const char*>(&x), 4); };
        auto w64 = [&out](std::uint64_t x) { out.write(reinterpret_cast<const char*>(&x), 8); };
        w32(static_cast<std::uint32_t>(cfg_.in_c));
        w32(static_cast<std::uint32_t>(cfg_.base_c));
        w32(static_cast<std::uint32_t>(cfg_.out_c));
        w64(cfg_.init_seed);
        w32(static_cast<std::uint32_t>(conv_.size()));
        for (const auto& c : conv_) {
            w32(static_cast<std::uint32_t>(c.W.size()));
            out.write(reinterpret_cast<const char*>(c.W.data()),
                      static_cast<std::streamsize>(c.W.size() * sizeof(float)));
            w32(static_cast<std::uint32_t>(c.b.size()));
            out.write(reinterpret_cast<const char*>(c.b.data()),
                      static_cast<std::streamsize>(c.b.size() * sizeof(float)));
        }
        if (!out) throw std::runtime_error("unet: short write to " + path);
    }

    static UNet load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("unet: cannot read " + path);
        char magic[8];
        in.read(magic, 8);
        if (!in || std::memcmp(magic, "XEVW1", 5) != 0)
            throw std::runtime_error("unet: bad weight file " + path);
        auto r32 = [&in]() {
            std::uint32_t x = 0;
            in.read(reinterpret_cast<char*>(&x), 4);
            return x;
        };
        auto r64 = [&in]() {
            std::uint64_t x = 0;
            in.read(reinterpret_cast<char*>(&x), 8);
            return x;
        };
        UNetConfig cfg;
        cfg.in_c = static_cast<int>(r32());
        cfg.base_c = static_cast<int>(r32());
        cfg.out_c = static_cast<int>(r32());
        cfg.init_seed = r64();
        UNet net(cfg);
        const std::uint32_t n = r32();
        if (n != net.conv_.size()) throw std::runtime_error("unet: layer count mismatch");
        for (auto& c : net.conv_) {
            const std::uint32_t nw = r32();
            if (nw != c.W.size()) throw std::runtime_error("unet: weight size mismatch");
            in.read(reinterpret_cast<char*>(c.W.data()),
                    static_cast<std::streamsize>(nw * sizeof(float)));
            const std::uint32_t nb = r32();
            if (nb != c.b.size()) throw std::runtime_error("unet: bias size mismatch");
            in.read(reinterpret_cast<char*>(c.b.data()),
                    static_cast<std::streamsize>(nb * sizeof(float)));
        }
        if (!in) throw std::runtime_error("unet: truncated weight file " + path);
        return net;
    }

    // Raw parameter access for hashing and equality checks.
    const std::array<nn::ConvParams, 11>& convs() const { return conv_; }
    std::array<nn::ConvParams, 11>& convs_mutable() { return conv_; }

private:
    UNetConfig cfg_;
    std::array<nn::ConvParams, 11> conv_;
};

}  // namespace xaieval
