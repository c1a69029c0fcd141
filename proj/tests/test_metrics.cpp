#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "xaieval/metrics.hpp"
#include "xaieval/rng.hpp"

using namespace xaieval;

namespace {

Grid random_mask(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Grid g(h, w);
    for (auto& v : g.v) v = static_cast<float>(rng.uniform());
    return g;
}

// Brute-force double-loop oracle, deliberately independent of the library
// implementation.
struct BruteForce {
    double ana = 0.0;
    double srm = 0.0;
    std::int64_t count = 0;
};

BruteForce brute_force_metrics(const Grid& mask, double tau) {
    BruteForce out;
    double a = 0.0, s = 0.0;
    for (int i = 0; i < mask.h; ++i) {
        for (int j = 0; j < mask.w; ++j) {
            const double v = mask.at(i, j);
            if (v > tau) {
                a += v;
                s += v * v;
                ++out.count;
            }
        }
    }
    if (out.count > 0) {
        out.ana = a / static_cast<double>(out.count);
        out.srm = s / static_cast<double>(out.count);
    }
    return out;
}

}  // namespace

TEST_CASE("retained_pixels thresholds strictly above tau") {
    Grid o(2, 2);
    o.v = {0.05f, 0.2f, 0.0f, 0.15f};
    const Region all = retained_pixels(o, -0.1);
    CHECK(all.count == 4);
    const Region some = retained_pixels(o, 0.1);
    CHECK(some.count == 2);
    CHECK(some.contains(0, 1));
    CHECK(some.contains(1, 1));
    CHECK_FALSE(some.contains(0, 0));
    const Region none = retained_pixels(o, 1.0);
    CHECK(none.count == 0);
}

TEST_CASE("ana matches the worked examples") {
    Grid zeros(4, 4, 0.0f);
    CHECK(*ana(zeros, -0.1) == 0.0);

    Grid o(2, 2);
    o.v = {0.2f, 0.4f, 0.6f, 0.8f};
    CHECK(*ana(o, -0.1) == Catch::Approx(0.5).margin(1e-12));
    CHECK(*ana(o, 0.5) == Catch::Approx(0.7).margin(1e-7));
}

TEST_CASE("srm matches the worked examples") {
    Grid zeros(4, 4, 0.0f);
    CHECK(*srm(zeros, -0.1) == 0.0);

    Grid o(2, 2);
    o.v = {0.2f, 0.4f, 0.6f, 0.8f};
    CHECK(*srm(o, -0.1) == Catch::Approx(0.30).margin(1e-7));

    Grid half(8, 8, 0.5f);
    CHECK(*srm(half, -0.1) == Catch::Approx(0.25).margin(1e-12));
    CHECK(*srm(half, -0.1) == Catch::Approx((*ana(half, -0.1)) * (*ana(half, -0.1))).margin(1e-12));
}

TEST_CASE("empty retained set yields null, never zero") {
    Grid o(4, 4, 0.3f);
    CHECK_FALSE(ana(o, 1.0).has_value());
    CHECK_FALSE(srm(o, 1.0).has_value());
    CHECK(ana(o, 0.29).has_value());
}

TEST_CASE("metrics match the brute-force oracle to 1e-12 across the sweep") {
    const ThresholdSweep sweep;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        const Grid mask = random_mask(64, 64, 1000 + trial);
        for (double tau : sweep.taus) {
            const BruteForce bf = brute_force_metrics(mask, tau);
            const auto a = ana(mask, tau);
            const auto s = srm(mask, tau);
            if (bf.count == 0) {
                CHECK_FALSE(a.has_value());
                CHECK_FALSE(s.has_value());
            } else {
                REQUIRE(a.has_value());
                REQUIRE(s.has_value());
                CHECK(std::abs(*a - bf.ana) <= 1e-12);
                CHECK(std::abs(*s - bf.srm) <= 1e-12);
                CHECK(*s <= *a + 1e-12);  // v² ≤ v on [0,1]
            }
        }
        // ANA nondecreasing in tau
        double prev = -1.0;
        for (double tau : sweep.taus) {
            const auto a = ana(mask, tau);
            if (!a) continue;
            CHECK(*a >= prev - 1e-12);
            prev = *a;
        }
    }
}

TEST_CASE("sweep validation rejects disorder") {
    ThresholdSweep bad;
    bad.taus = {0.0, 0.0};
    CHECK_THROWS_AS(validate_sweep(bad), std::invalid_argument);
    bad.taus = {0.2, 0.1};
    CHECK_THROWS_AS(validate_sweep(bad), std::invalid_argument);
    bad.taus = {};
    CHECK_THROWS_AS(validate_sweep(bad), std::invalid_argument);
    ThresholdSweep good;
    CHECK_NOTHROW(validate_sweep(good));
}

namespace {

// Minimal stand-ins so the evaluation loop can run without training.
struct StubExplainer final : Explainer {
    std::string id_;
    float fill;
    explicit StubExplainer(std::string id, float value) : id_(std::move(id)), fill(value) {}
    std::string id() const override { return id_; }
    SaliencyMap explain(WhiteBoxSegModel&, const DataItem& item, int target_class) override {
        return make_saliency(Grid(item.image.h, item.image.w, fill), target_class, id_);
    }
};

struct ThrowingExplainer final : Explainer {
    std::string id() const override { return "boom"; }
    SaliencyMap explain(WhiteBoxSegModel&, const DataItem&, int) override {
        throw std::runtime_error("synthetic failure");
    }
};

UnetSegModel tiny_model(int in_c = 1) {
    UNetConfig cfg;
    cfg.in_c = in_c;
    cfg.base_c = 2;
    cfg.out_c = 2;
    cfg.init_seed = 77;
    return UnetSegModel(UNet(cfg));
}

NoiseModel tiny_noise_model(int in_c = 1) {
    UNetConfig cfg;
    cfg.in_c = in_c;
    cfg.base_c = 2;
    cfg.out_c = 1;
    cfg.init_seed = 78;
    return NoiseModel(UNet(cfg));
}

std::vector<DataItem> tiny_items(int n) {
    const Dataset ds = gen_shapes_dataset(11, n, 32, 2);
    std::vector<DataItem> items = ds.train;
    items.insert(items.end(), ds.val.begin(), ds.val.end());
    items.insert(items.end(), ds.test.begin(), ds.test.end());
    return items;
}

}  // namespace

TEST_CASE("evaluate_method produces |taus| rows per image") {
    auto items = tiny_items(4);
    UnetSegModel utility = tiny_model();
    const NoiseModel nm = tiny_noise_model();
    StubExplainer ex("stub", 0.5f);
    const ThresholdSweep sweep;
    const MetricsReport r = evaluate_method(ex, nm, utility, items, 1, Technique::mul,
                                            SamplingConfig{}, sweep);
    CHECK(r.rows.size() == items.size() * sweep.taus.size());
    CHECK(r.failure_count == 0);
    for (const auto& row : r.rows) {
        CHECK(row.method_id == "stub");
        CHECK(row.technique == "mul");
    }
    // aggregates exist for each tau
    CHECK(r.aggregates.size() == sweep.taus.size());
}

TEST_CASE("all-ones saliency with mul reduces to the raw-image baseline") {
    auto items = tiny_items(4);
    UnetSegModel utility = tiny_model();
    const NoiseModel nm = tiny_noise_model();
    StubExplainer ones("ones", 1.0f);
    const ThresholdSweep sweep;
    const MetricsReport r = evaluate_method(ones, nm, utility, items, 1, Technique::mul,
                                            SamplingConfig{}, sweep);
    // Oracle: feed the raw image directly through the noise model.
    for (const auto& row : r.rows) {
        const DataItem* item = nullptr;
        for (const auto& it : items)
            if (it.id == row.image_id) item = &it;
        REQUIRE(item != nullptr);
        const Grid direct = nm.infer(item->image);
        const auto expect = ana(direct, row.tau);
        REQUIRE(row.ana.has_value() == expect.has_value());
        if (expect) CHECK(*row.ana == Catch::Approx(*expect).margin(1e-12));
    }
}

TEST_CASE("per-image failures are recorded and the run continues") {
    auto items = tiny_items(3);
    UnetSegModel utility = tiny_model();
    const NoiseModel nm = tiny_noise_model();
    ThrowingExplainer ex;
    const MetricsReport r = evaluate_method(ex, nm, utility, items, 1, Technique::mul,
                                            SamplingConfig{}, ThresholdSweep{});
    CHECK(r.rows.empty());
    CHECK(r.failure_count == static_cast<int>(items.size()));
    CHECK(r.failures.size() == items.size());
}

TEST_CASE("metrics csv round-trips") {
    auto items = tiny_items(3);
    UnetSegModel utility = tiny_model();
    const NoiseModel nm = tiny_noise_model();
    StubExplainer ex("stub", 0.25f);
    const MetricsReport r = evaluate_method(ex, nm, utility, items, 1, Technique::add,
                                            SamplingConfig{}, ThresholdSweep{});
    const std::string csv = metrics_csv(r);
    const MetricsReport back = metrics_from_csv(csv);
    REQUIRE(back.rows.size() == r.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        CHECK(back.rows[i].method_id == r.rows[i].method_id);
        CHECK(back.rows[i].technique == r.rows[i].technique);
        CHECK(back.rows[i].tau == Catch::Approx(r.rows[i].tau).margin(1e-12));
        REQUIRE(back.rows[i].ana.has_value() == r.rows[i].ana.has_value());
        if (r.rows[i].ana)
            CHECK(*back.rows[i].ana == Catch::Approx(*r.rows[i].ana).margin(1e-9));
        CHECK(back.rows[i].image_id == r.rows[i].image_id);
    }
    // identical bytes when regenerated
    CHECK(metrics_csv(back) == csv);
}
