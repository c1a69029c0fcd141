#pragma once
// Seg-Sobol: variance-based attribution over a coarse perturbation grid.
// Design matrices come from a digitally-shifted Sobol sequence; scores are
// summed target-class probabilities of the segmentation output; total-order
// indices use the Jansen estimator.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "xaieval/image_ops.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/seg_model.hpp"
#include "xaieval/sobol_directions.hpp"
#include "xaieval/types.hpp"

namespace xaieval {

enum class BaselineKind { blur, zero, mean };

inline const char* baseline_name(BaselineKind b) {
    switch (b) {
        case BaselineKind::blur: return "blur";
        case BaselineKind::zero: return "zero";
        case BaselineKind::mean: return "mean";
    }
    return "?";
}

inline BaselineKind baseline_from_name(const std::string& s) {
    if (s == "blur") return BaselineKind::blur;
    if (s == "zero") return BaselineKind::zero;
    if (s == "mean") return BaselineKind::mean;
    throw std::invalid_argument("unknown baseline '" + s + "'");
}

struct SobolConfig {
    int grid_size = 11;     // masks are g×g before upsampling
    int n_designs = 2048;   // N rows per design matrix, power of two
    std::uint64_t seed = 0;
    BaselineKind baseline = BaselineKind::blur;
    double blur_sigma = 5.0;
    int jobs = 1;
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline void validate_sobol_config(const SobolConfig& cfg) {
    if (cfg.grid_size < 2)
        throw std::invalid_argument("sobol: grid_size must be >= 2");
    if (cfg.n_designs < 32 || !is_power_of_two(cfg.n_designs))
        throw std::invalid_argument("sobol: n_designs must be a power of two >= 32");
}

struct PerturbationMask {
    Grid coarse;     // g×g in [0,1]
    Grid upsampled;  // H×W bilinear interpolation of coarse
};

struct SobolIndices {
    Grid total_order;  // g×g, clamped to [0,1]
    bool degenerate = false;
};

// Gray-code Sobol sequence with an optional per-dimension digital shift so
// that distinct seeds give distinct (still low-discrepancy) point sets.
class SobolSequence {
public:
    static constexpr int kBits = 31;

    SobolSequence(int dims, std::uint64_t seed) : dims_(dims), state_(dims, 0), index_(0) {
        if (dims < 1 || dims > detail::kSobolMaxDims)
            throw std::invalid_argument("sobol: dimension count out of table range");
        dirs_.assign(static_cast<std::size_t>(dims) * kBits, 0);
        for (int d = 0; d < dims; ++d) init_dim(d);
        shift_.resize(dims);
        Rng rng(derive_seed(seed, 0x50B0));
        for (auto& s : shift_) s = rng.next_u32() >> (32 - kBits);
    }

    int dims() const { return dims_; }

    // Writes the next point into out[0..dims).
    void next(double* out) {
        if (index_ > 0) {
            const int bit = lowest_set_bit(index_);
            for (int d = 0; d < dims_; ++d)
                state_[d] ^= dirs_[static_cast<std::size_t>(d) * kBits + bit];
        }
        constexpr double scale = 1.0 / (1u << kBits);
        for (int d = 0; d < dims_; ++d)
            out[d] = (state_[d] ^ shift_[d]) * scale;
        ++index_;
    }

private:
    static int lowest_set_bit(std::uint64_t n) {
        int b = 0;
        while ((n & 1) == 0) {
            n >>= 1;
            ++b;
        }
        return b;
    }

    void init_dim(int d) {
        std::uint32_t* V = dirs_.data() + static_cast<std::size_t>(d) * kBits;  // V[k-1]
        if (d == 0) {
            for (int k = 1; k <= kBits; ++k) V[k - 1] = 1u << (kBits - k);
            return;
        }
        const auto& e = detail::kSobolDims[static_cast<std::size_t>(d - 1)];
        const int s = e.s;
        for (int k = 1; k <= std::min<int>(s, kBits); ++k)
            V[k - 1] = e.m[static_cast<std::size_t>(k - 1)] << (kBits - k);
        for (int k = s + 1; k <= kBits; ++k) {
            std::uint32_t v = V[k - s - 1] ^ (V[k - s - 1] >> s);
            for (int i = 1; i < s; ++i)
                if ((e.a >> (s - 1 - i)) & 1u) v ^= V[k - i - 1];
            V[k - 1] = v;
        }
    }

    int dims_;
    std::vector<std::uint32_t> dirs_;
    std::vector<std::uint32_t> state_;
    std::vector<std::uint32_t> shift_;
    std::uint64_t index_;
};

struct DesignMatrices {
    int n = 0;
    int d = 0;
    std::vector<double> A;  // row-major n×d
    std::vector<double> B;
};

// Joint 2d-dimensional Sobol draw split into the A and B halves, which keeps
// the (A, B, AB_i) triple balanced for the Jansen estimator.
inline DesignMatrices sample_design_matrices_dims(int d, int n, std::uint64_t seed) {
    if (d < 1) throw std::invalid_argument("sobol: need at least one input");
    if (n < 32 || !is_power_of_two(n))
        throw std::invalid_argument("sobol: n_designs must be a power of two >= 32");
    DesignMatrices m;
    m.n = n;
    m.d = d;
    m.A.resize(static_cast<std::size_t>(m.n) * d);
    m.B.resize(static_cast<std::size_t>(m.n) * d);
    SobolSequence seq(2 * d, seed);
    std::vector<double> pt(static_cast<std::size_t>(2) * d);
    for (int r = 0; r < m.n; ++r) {
        seq.next(pt.data());
        for (int j = 0; j < d; ++j) {
            m.A[static_cast<std::size_t>(r) * d + j] = pt[j];
            m.B[static_cast<std::size_t>(r) * d + j] = pt[d + j];
        }
    }
    return m;
}

inline DesignMatrices sample_design_matrices(const SobolConfig& cfg) {
    validate_sobol_config(cfg);
    return sample_design_matrices_dims(cfg.grid_size * cfg.grid_size, cfg.n_designs,
                                       cfg.seed);
}

// I' = m ⊙ I + (1-m) ⊙ baseline, per pixel per channel.
inline Image perturb(const Image& img, const Grid& mask, const Image& baseline) {
    if (mask.h != img.h || mask.w != img.w)
        throw std::invalid_argument("perturb: mask dims mismatch");
    if (baseline.c != img.c || baseline.h != img.h || baseline.w != img.w)
        throw std::invalid_argument("perturb: baseline dims mismatch");
    Image out = img;
    for (int ch = 0; ch < img.c; ++ch)
        for (int i = 0; i < img.h; ++i)
            for (int j = 0; j < img.w; ++j) {
                const float m = mask.at(i, j);
                out.at(ch, i, j) = m * img.at(ch, i, j) + (1.0f - m) * baseline.at(ch, i, j);
            }
    return out;
}

inline Image make_baseline(const Image& img, BaselineKind kind, double blur_sigma = 5.0) {
    switch (kind) {
        case BaselineKind::blur:
            return gaussian_blur(img, blur_sigma);
        case BaselineKind::zero: {
            Image z = img;
            std::fill(z.v.begin(), z.v.end(), 0.0f);
            return z;
        }
        case BaselineKind::mean: {
            Image m = img;
            for (int ch = 0; ch < img.c; ++ch) {
                double acc = 0.0;
                for (int i = 0; i < img.h; ++i)
                    for (int j = 0; j < img.w; ++j) acc += img.at(ch, i, j);
                const float mean = static_cast<float>(acc / (static_cast<double>(img.h) * img.w));
                for (int i = 0; i < img.h; ++i)
                    for (int j = 0; j < img.w; ++j) m.at(ch, i, j) = mean;
            }
            return m;
        }
    }
    throw std::invalid_argument("make_baseline: bad kind");
}

// Sum of target-class probabilities over the region (default: whole raster).
inline double seg_score(const ProbMask& pm, int target_class,
                        const std::optional<Region>& region = std::nullopt) {
    if (target_class < 0 || target_class >= pm.k)
        throw std::invalid_argument("seg_score: class index out of range");
    if (region) {
        if (region->h != pm.h || region->w != pm.w)
            throw std::invalid_argument("seg_score: region dims mismatch");
        if (region->count == 0)
            throw std::invalid_argument("seg_score: empty region");
    }
    double acc = 0.0;
    for (int i = 0; i < pm.h; ++i)
        for (int j = 0; j < pm.w; ++j)
            if (!region || region->contains(i, j)) acc += pm.at(target_class, i, j);
    return acc;
}

inline double seg_score(const SegModel& model, const Image& img, int target_class,
                        const std::optional<Region>& region = std::nullopt) {
    return seg_score(model.predict(img), target_class, region);
}

struct TotalOrderResult {
    std::vector<double> st;  // raw estimates, one per input
    bool degenerate = false;
};

// Jansen total-order estimator over d inputs.
//   ST_i = [ (1/2N) Σ_n (fA_n - fAB_{i,n})² ] / Var(fA)
// fAB is row-major d×N: row i holds the scores of A with column i swapped
// from B. Degenerate output variance yields all-zero indices with a flag.
inline TotalOrderResult jansen_total_order_raw(const std::vector<double>& fA,
                                               const std::vector<double>& fAB, int d) {
    const auto n = fA.size();
    if (d < 1 || n == 0 || fAB.size() != static_cast<std::size_t>(d) * n)
        throw std::invalid_argument("jansen: score array shape mismatch");

    double mean = 0.0;
    for (double v : fA) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : fA) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    TotalOrderResult out;
    out.st.assign(static_cast<std::size_t>(d), 0.0);
    if (var <= 1e-12) {
        out.degenerate = true;
        return out;
    }
    for (int i = 0; i < d; ++i) {
        double acc = 0.0;
        const double* row = fAB.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t r = 0; r < n; ++r) {
            const double diff = fA[r] - row[r];
            acc += diff * diff;
        }
        out.st[static_cast<std::size_t>(i)] = acc / (2.0 * static_cast<double>(n) * var);
    }
    return out;
}

// Grid view of the estimator with indices clamped to [0,1] for saliency use.
inline SobolIndices jansen_total_order(const std::vector<double>& fA,
                                       const std::vector<double>& fAB, int grid_size) {
    const int d = grid_size * grid_size;
    const TotalOrderResult raw = jansen_total_order_raw(fA, fAB, d);
    SobolIndices out;
    out.degenerate = raw.degenerate;
    out.total_order = Grid(grid_size, grid_size, 0.0f);
    for (int i = 0; i < d; ++i)
        out.total_order.v[static_cast<std::size_t>(i)] =
            static_cast<float>(std::min(1.0, std::max(0.0, raw.st[static_cast<std::size_t>(i)])));
    return out;
}

namespace detail {

inline Grid coarse_from_row(const double* row, int g) {
    Grid m(g, g);
    for (int i = 0; i < g * g; ++i) m.v[static_cast<std::size_t>(i)] = static_cast<float>(row[i]);
    return m;
}

inline std::vector<double> score_rows(const SegModel& model, const Image& img,
                                      const Image& baseline, int target_class,
                                      const std::vector<double>& rows, int n, int d, int g,
                                      int jobs) {
    std::vector<Image> batch;
    batch.reserve(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        Grid coarse = coarse_from_row(rows.data() + static_cast<std::size_t>(r) * d, g);
        Grid up = bilinear_resize(coarse, img.h, img.w);
        batch.push_back(perturb(img, up, baseline));
    }
    const auto preds = model.predict_batch(batch, jobs);
    std::vector<double> scores(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r)
        scores[static_cast<std::size_t>(r)] = seg_score(preds[static_cast<std::size_t>(r)], target_class);
    return scores;
}

}  // namespace detail

// Full Seg-Sobol pipeline: design → perturb → score → Jansen → upsample →
// normalize. Deterministic given (model weights, image, class, config).
inline SaliencyMap seg_sobol_explain(const SegModel& model, const Image& img,
                                     int target_class, const SobolConfig& cfg) {
    validate_sobol_config(cfg);
    if (target_class < 0 || target_class >= model.num_classes())
        throw std::invalid_argument("seg_sobol_explain: class index out of range");

    const int g = cfg.grid_size;
    const int d = g * g;
    const DesignMatrices dm = sample_design_matrices(cfg);
    const Image baseline = make_baseline(img, cfg.baseline, cfg.blur_sigma);

    const std::vector<double> fA = detail::score_rows(model, img, baseline, target_class,
                                                      dm.A, dm.n, d, g, cfg.jobs);

    std::vector<double> fAB(static_cast<std::size_t>(d) * dm.n);
    std::vector<double> swapped(dm.A.size());
    for (int i = 0; i < d; ++i) {
        swapped = dm.A;
        for (int r = 0; r < dm.n; ++r)
            swapped[static_cast<std::size_t>(r) * d + i] = dm.B[static_cast<std::size_t>(r) * d + i];
        const auto scores = detail::score_rows(model, img, baseline, target_class, swapped,
                                               dm.n, d, g, cfg.jobs);
        std::copy(scores.begin(), scores.end(), fAB.begin() + static_cast<std::size_t>(i) * dm.n);
    }

    const SobolIndices st = jansen_total_order(fA, fAB, g);
    Grid up = bilinear_resize(st.total_order, img.h, img.w);
    SaliencyMap sal = normalize_saliency(up, target_class, "seg_sobol", st.degenerate);
    return sal;
}

}  // namespace xaieval
