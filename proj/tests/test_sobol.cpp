#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "xaieval/rng.hpp"
#include "xaieval/sobol.hpp"

using namespace xaieval;

namespace {

constexpr double kPi = 3.14159265358979323846;

using ScalarFn = std::function<double(const double*)>;

std::vector<double> eval_rows(const ScalarFn& f, const std::vector<double>& rows, int n, int d) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) out[static_cast<std::size_t>(r)] = f(rows.data() + static_cast<std::size_t>(r) * d);
    return out;
}

// Runs the full Jansen pipeline over analytic scalar functions.
std::vector<double> jansen_estimate(const ScalarFn& f, int d, int n, std::uint64_t seed) {
    const DesignMatrices dm = sample_design_matrices_dims(d, n, seed);
    const std::vector<double> fA = eval_rows(f, dm.A, n, d);
    std::vector<double> fAB(static_cast<std::size_t>(d) * n);
    std::vector<double> swapped(dm.A.size());
    for (int i = 0; i < d; ++i) {
        swapped = dm.A;
        for (int r = 0; r < n; ++r)
            swapped[static_cast<std::size_t>(r) * d + i] = dm.B[static_cast<std::size_t>(r) * d + i];
        const auto scores = eval_rows(f, swapped, n, d);
        std::copy(scores.begin(), scores.end(), fAB.begin() + static_cast<std::size_t>(i) * n);
    }
    return jansen_total_order_raw(fA, fAB, d).st;
}

double ishigami(const double* u) {
    const double x1 = -kPi + 2.0 * kPi * u[0];
    const double x2 = -kPi + 2.0 * kPi * u[1];
    const double x3 = -kPi + 2.0 * kPi * u[2];
    const double a = 7.0, b = 0.1;
    return std::sin(x1) + a * std::sin(x2) * std::sin(x2) +
           b * x3 * x3 * x3 * x3 * std::sin(x1);
}

// Closed-form total-order indices of the Ishigami function.
std::vector<double> ishigami_total_closed_form(double a, double b) {
    const double pi4 = std::pow(kPi, 4);
    const double pi8 = std::pow(kPi, 8);
    const double V = a * a / 8.0 + b * pi4 / 5.0 + b * b * pi8 / 18.0 + 0.5;
    const double V13 = 8.0 * b * b * pi8 / 225.0;
    const double V1 = 0.5 * std::pow(1.0 + b * pi4 / 5.0, 2);
    const double V2 = a * a / 8.0;
    return {(V1 + V13) / V, V2 / V, V13 / V};
}

// Independent brute-force oracle: plain Monte Carlo with the Homma-Saltelli
// total-order identity ST_i = 1 - [ <fA fAB_i> - mean(fA)^2 ] / Var(fA).
std::vector<double> mc_total_oracle(const ScalarFn& f, int d, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
    std::vector<double> st(static_cast<std::size_t>(d), 0.0);
    std::vector<double> cross(static_cast<std::size_t>(d), 0.0);
    double mean = 0.0, sq = 0.0;
    for (int r = 0; r < n; ++r) {
        for (int j = 0; j < d; ++j) a[static_cast<std::size_t>(j)] = rng.uniform();
        for (int j = 0; j < d; ++j) b[static_cast<std::size_t>(j)] = rng.uniform();
        const double fa = f(a.data());
        mean += fa;
        sq += fa * fa;
        for (int i = 0; i < d; ++i) {
            std::vector<double> ab = a;
            ab[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)];
            cross[static_cast<std::size_t>(i)] += fa * f(ab.data());
        }
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    for (int i = 0; i < d; ++i)
        st[static_cast<std::size_t>(i)] = 1.0 - (cross[static_cast<std::size_t>(i)] / n - mean * mean) / var;
    return st;
}

struct ConstantModel final : SegModel {
    int k = 2;
    ProbMask predict(const Image& img) const override {
        ProbMask pm;
        pm.k = k;
        pm.h = img.h;
        pm.w = img.w;
        pm.v.assign(static_cast<std::size_t>(k) * img.h * img.w, 1.0f / static_cast<float>(k));
        return pm;
    }
    int num_classes() const override { return k; }
};

// Class-1 probability equals the pixel intensity; linear in every mask cell.
struct BrightnessModel final : SegModel {
    ProbMask predict(const Image& img) const override {
        ProbMask pm;
        pm.k = 2;
        pm.h = img.h;
        pm.w = img.w;
        pm.v.resize(static_cast<std::size_t>(2) * img.h * img.w);
        for (int i = 0; i < img.h; ++i) {
            for (int j = 0; j < img.w; ++j) {
                const float p1 = img.at(0, i, j);
                pm.at(1, i, j) = p1;
                pm.at(0, i, j) = 1.0f - p1;
            }
        }
        return pm;
    }
    int num_classes() const override { return 2; }
};

Image gradient_image(int h, int w) {
    std::vector<float> v(static_cast<std::size_t>(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            v[static_cast<std::size_t>(i) * w + j] =
                static_cast<float>(i + j) / static_cast<float>(h + w - 2);
    return make_image(1, h, w, std::move(v));
}

}  // namespace

TEST_CASE("design matrices are balanced, deterministic, and distinct") {
    SobolConfig cfg;
    cfg.grid_size = 2;
    cfg.n_designs = 64;
    cfg.seed = 5;
    const DesignMatrices m = sample_design_matrices(cfg);
    REQUIRE(m.d == 4);
    REQUIRE(m.n == 64);
    for (int j = 0; j < m.d; ++j) {
        double accA = 0.0, accB = 0.0;
        for (int r = 0; r < m.n; ++r) {
            const double a = m.A[static_cast<std::size_t>(r) * m.d + j];
            const double b = m.B[static_cast<std::size_t>(r) * m.d + j];
            CHECK(a >= 0.0);
            CHECK(a < 1.0);
            accA += a;
            accB += b;
        }
        CHECK(accA / m.n >= 0.4);
        CHECK(accA / m.n <= 0.6);
        CHECK(accB / m.n >= 0.4);
        CHECK(accB / m.n <= 0.6);
    }

    const DesignMatrices m2 = sample_design_matrices(cfg);
    CHECK(m.A == m2.A);
    CHECK(m.B == m2.B);

    for (int r = 0; r < m.n; ++r) {
        bool row_differs = false;
        for (int j = 0; j < m.d; ++j)
            row_differs |= m.A[static_cast<std::size_t>(r) * m.d + j] !=
                           m.B[static_cast<std::size_t>(r) * m.d + j];
        CHECK(row_differs);
    }

    cfg.seed = 6;
    const DesignMatrices m3 = sample_design_matrices(cfg);
    CHECK(m.A != m3.A);
}

TEST_CASE("sobol columns are exactly equidistributed at dyadic resolutions") {
    // Every 1-D projection of a 2^m-point Sobol sequence puts exactly
    // 2^m / 2^b points into each of 2^b dyadic bins; the digital shift
    // preserves this.
    const int dims = 8;
    const int n = 64;
    SobolSequence seq(dims, 123);
    std::vector<double> pt(dims);
    std::vector<std::vector<int>> bins(dims, std::vector<int>(8, 0));
    for (int r = 0; r < n; ++r) {
        seq.next(pt.data());
        for (int j = 0; j < dims; ++j) {
            const int b = std::min(7, static_cast<int>(pt[static_cast<std::size_t>(j)] * 8.0));
            ++bins[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)];
        }
    }
    for (int j = 0; j < dims; ++j)
        for (int b = 0; b < 8; ++b) CHECK(bins[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)] == 8);
}

TEST_CASE("design matrix validation") {
    SobolConfig cfg;
    cfg.grid_size = 1;
    CHECK_THROWS_AS(sample_design_matrices(cfg), std::invalid_argument);
    cfg.grid_size = 4;
    cfg.n_designs = 48;  // not a power of two
    CHECK_THROWS_AS(sample_design_matrices(cfg), std::invalid_argument);
    cfg.n_designs = 16;  // below minimum
    CHECK_THROWS_AS(sample_design_matrices(cfg), std::invalid_argument);
}

TEST_CASE("jansen recovers analytic indices for f(x)=x1") {
    const auto st = jansen_estimate([](const double* x) { return x[0]; }, 2, 4096, 1);
    CHECK(std::abs(st[0] - 1.0) <= 0.05);
    CHECK(std::abs(st[1] - 0.0) <= 0.05);
}

TEST_CASE("jansen recovers analytic indices for f(x)=x1+x2") {
    const auto st = jansen_estimate([](const double* x) { return x[0] + x[1]; }, 2, 4096, 2);
    CHECK(std::abs(st[0] - 0.5) <= 0.05);
    CHECK(std::abs(st[1] - 0.5) <= 0.05);
}

TEST_CASE("ishigami closed form, MC oracle, and jansen estimate agree") {
    const auto closed = ishigami_total_closed_form(7.0, 0.1);
    CHECK(closed[0] == Catch::Approx(0.558).margin(2e-3));
    CHECK(closed[1] == Catch::Approx(0.442).margin(2e-3));
    CHECK(closed[2] == Catch::Approx(0.244).margin(2e-3));

    const auto mc = mc_total_oracle(ishigami, 3, 1 << 16, 99);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(mc[static_cast<std::size_t>(i)] - closed[static_cast<std::size_t>(i)]) < 0.03);

    const auto st = jansen_estimate(ishigami, 3, 8192, 3);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(st[static_cast<std::size_t>(i)] - closed[static_cast<std::size_t>(i)]) <= 0.05);
}

TEST_CASE("jansen error shrinks as the design count doubles") {
    const auto closed = ishigami_total_closed_form(7.0, 0.1);
    std::vector<double> errs;
    for (int n : {512, 2048, 8192}) {
        const auto st = jansen_estimate(ishigami, 3, n, 7);
        double e = 0.0;
        for (int i = 0; i < 3; ++i)
            e = std::max(e, std::abs(st[static_cast<std::size_t>(i)] - closed[static_cast<std::size_t>(i)]));
        errs.push_back(e);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < errs.size(); ++i)
        if (errs[i] > errs[i - 1]) ++inversions;
    CHECK(inversions <= 1);
    CHECK(errs.back() <= 0.05);
}

TEST_CASE("jansen flags degenerate outputs") {
    const std::vector<double> fA(128, 3.25);
    const std::vector<double> fAB(2 * 128, 3.25);
    const auto res = jansen_total_order_raw(fA, fAB, 2);
    CHECK(res.degenerate);
    for (double v : res.st) CHECK(v == 0.0);

    const auto grid = jansen_total_order(std::vector<double>(128, 1.0),
                                         std::vector<double>(4 * 128, 1.0), 2);
    CHECK(grid.degenerate);
    for (float v : grid.total_order.v) CHECK(v == 0.0f);
}

TEST_CASE("perturb identity and occlusion endpoints are exact") {
    const Image img = gradient_image(32, 32);
    const Image baseline = make_baseline(img, BaselineKind::zero);
    const Image ones = perturb(img, Grid(32, 32, 1.0f), baseline);
    CHECK(ones.v == img.v);
    const Image zeros = perturb(img, Grid(32, 32, 0.0f), baseline);
    CHECK(zeros.v == baseline.v);
    const Image half = perturb(img, Grid(32, 32, 0.5f), baseline);
    for (std::size_t i = 0; i < img.v.size(); ++i)
        CHECK(half.v[i] == Catch::Approx(0.5f * img.v[i]).margin(1e-6));
}

TEST_CASE("baselines have the advertised content") {
    const Image img = gradient_image(32, 32);
    const Image z = make_baseline(img, BaselineKind::zero);
    for (float v : z.v) CHECK(v == 0.0f);
    const Image m = make_baseline(img, BaselineKind::mean);
    double acc = 0.0;
    for (float v : img.v) acc += v;
    const float mean = static_cast<float>(acc / img.v.size());
    for (float v : m.v) CHECK(v == Catch::Approx(mean).margin(1e-5));
    const Image b = make_baseline(img, BaselineKind::blur, 5.0);
    CHECK(b.v != img.v);
}

TEST_CASE("seg_score sums target-class probabilities over the region") {
    ProbMask pm;
    pm.k = 2;
    pm.h = 2;
    pm.w = 2;
    pm.v = {0, 0, 0, 0, 1, 1, 1, 1};  // class 1 everywhere
    CHECK(seg_score(pm, 1) == 4.0);
    CHECK(seg_score(pm, 0) == 0.0);

    ProbMask single;
    single.k = 2;
    single.h = 1;
    single.w = 2;
    single.v = {0.3f, 0.5f, 0.7f, 0.5f};
    std::vector<std::uint8_t> mask = {1, 0};
    const Region r = region_from_mask(1, 2, mask);
    CHECK(seg_score(single, 1, r) == Catch::Approx(0.7).margin(1e-7));

    ConstantModel uniform;
    const Image img = gradient_image(64, 64);
    CHECK(seg_score(uniform, img, 1) == Catch::Approx(2048.0).margin(1e-3));
}

TEST_CASE("seg_score is additive over disjoint regions") {
    Rng rng(9);
    ProbMask pm;
    pm.k = 2;
    pm.h = 16;
    pm.w = 16;
    pm.v.resize(2 * 16 * 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            const float p = static_cast<float>(rng.uniform());
            pm.at(1, i, j) = p;
            pm.at(0, i, j) = 1.0f - p;
        }
    std::vector<std::uint8_t> m1(256, 0), m2(256, 0), mu(256, 0);
    for (int i = 0; i < 256; ++i) {
        const int pick = static_cast<int>(rng.uniform_int(0, 2));
        if (pick == 0) m1[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i)] = 1;
        if (pick == 1) m2[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i)] = 1;
    }
    const double s1 = seg_score(pm, 1, region_from_mask(16, 16, m1));
    const double s2 = seg_score(pm, 1, region_from_mask(16, 16, m2));
    const double su = seg_score(pm, 1, region_from_mask(16, 16, mu));
    CHECK(su == Catch::Approx(s1 + s2).margin(1e-9));
}

TEST_CASE("seg_score rejects bad arguments") {
    ProbMask pm;
    pm.k = 2;
    pm.h = 2;
    pm.w = 2;
    pm.v.assign(8, 0.5f);
    CHECK_THROWS_AS(seg_score(pm, 2), std::invalid_argument);
    const Region empty = region_from_mask(2, 2, std::vector<std::uint8_t>(4, 0));
    CHECK_THROWS_AS(seg_score(pm, 1, empty), std::invalid_argument);
}

TEST_CASE("seg_sobol_explain flags constant models as degenerate") {
    ConstantModel model;
    SobolConfig cfg;
    cfg.grid_size = 2;
    cfg.n_designs = 32;
    cfg.baseline = BaselineKind::zero;
    const Image img = gradient_image(32, 32);
    const SaliencyMap sal = seg_sobol_explain(model, img, 1, cfg);
    CHECK(sal.degenerate);
    for (float v : sal.values.v) CHECK(v == 0.0f);
}

TEST_CASE("seg_sobol_explain emits a normalized full-size map") {
    BrightnessModel model;
    SobolConfig cfg;
    cfg.grid_size = 11;
    cfg.n_designs = 32;
    cfg.baseline = BaselineKind::zero;
    cfg.seed = 3;
    const Image img = gradient_image(64, 64);
    const SaliencyMap sal = seg_sobol_explain(model, img, 1, cfg);
    CHECK_FALSE(sal.degenerate);
    CHECK(sal.values.h == 64);
    CHECK(sal.values.w == 64);
    float lo = 1.0f, hi = 0.0f;
    for (float v : sal.values.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0f);
    CHECK(hi == 1.0f);

    const SaliencyMap again = seg_sobol_explain(model, img, 1, cfg);
    CHECK(sal.values.v == again.values.v);
}
