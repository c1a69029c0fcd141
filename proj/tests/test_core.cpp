#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "xaieval/hash.hpp"
#include "xaieval/image_ops.hpp"
#include "xaieval/rng.hpp"
#include "xaieval/types.hpp"

using namespace xaieval;

TEST_CASE("normalize_saliency rescales affinely") {
    Grid raw(2, 2);
    raw.v = {0.0f, 2.0f, 4.0f, 2.0f};
    const SaliencyMap s = normalize_saliency(raw, 0, "t");
    CHECK(s.values.at(0, 0) == 0.0f);
    CHECK(s.values.at(0, 1) == 0.5f);
    CHECK(s.values.at(1, 0) == 1.0f);
    CHECK(s.values.at(1, 1) == 0.5f);
}

TEST_CASE("normalize_saliency maps constant input to zeros") {
    Grid raw(3, 3, 3.7f);
    const SaliencyMap s = normalize_saliency(raw);
    for (float v : s.values.v) CHECK(v == 0.0f);
}

TEST_CASE("normalize_saliency rejects non-finite input") {
    Grid raw(2, 2, 0.0f);
    raw.v[3] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(normalize_saliency(raw), std::invalid_argument);
    raw.v[3] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(normalize_saliency(raw), std::invalid_argument);
}

TEST_CASE("image factory enforces invariants") {
    std::vector<float> ok(16 * 16, 0.5f);
    CHECK_NOTHROW(make_image(1, 16, 16, ok));
    CHECK_THROWS_AS(make_image(2, 16, 16, std::vector<float>(2 * 16 * 16, 0.5f)),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_image(1, 8, 16, std::vector<float>(8 * 16, 0.5f)),
                    std::invalid_argument);
    std::vector<float> bad = ok;
    bad[7] = 1.5f;
    CHECK_THROWS_AS(make_image(1, 16, 16, bad), std::invalid_argument);
}

TEST_CASE("saliency factory rejects out-of-range values") {
    Grid g(4, 4, 0.5f);
    CHECK_NOTHROW(make_saliency(g, 0, "m"));
    g.at(1, 1) = -0.01f;
    CHECK_THROWS_AS(make_saliency(g, 0, "m"), std::invalid_argument);
}

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("rng normal moments are sane") {
    Rng rng(7);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("bilinear_resize is identity at equal size and constant-preserving") {
    Grid g(5, 7);
    for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] = static_cast<float>(i) * 0.01f;
    const Grid same = bilinear_resize(g, 5, 7);
    for (std::size_t i = 0; i < g.v.size(); ++i)
        CHECK(same.v[i] == Catch::Approx(g.v[i]).margin(1e-6));

    Grid c(3, 3, 0.42f);
    const Grid up = bilinear_resize(c, 17, 23);
    for (float v : up.v) CHECK(v == Catch::Approx(0.42f).margin(1e-6));
}

TEST_CASE("bilinear_resize interpolates between cells") {
    Grid g(1, 2);
    g.v = {0.0f, 1.0f};
    const Grid up = bilinear_resize(g, 1, 4);
    CHECK(up.v[0] == Catch::Approx(0.0f).margin(1e-6));
    CHECK(up.v[1] == Catch::Approx(0.25f).margin(1e-6));
    CHECK(up.v[2] == Catch::Approx(0.75f).margin(1e-6));
    CHECK(up.v[3] == Catch::Approx(1.0f).margin(1e-6));
}

TEST_CASE("gaussian_blur preserves constants and mass approximately") {
    Image img = make_image(1, 32, 32, std::vector<float>(32 * 32, 0.3f));
    const Image b = gaussian_blur(img, 5.0);
    for (float v : b.v) CHECK(v == Catch::Approx(0.3f).margin(1e-5));
}

TEST_CASE("dilate_class grows a point into a disk") {
    SegMask m;
    m.h = m.w = 15;
    m.num_classes = 2;
    m.labels.assign(15 * 15, 0);
    m.labels[7 * 15 + 7] = 1;
    const Grid d = dilate_class(m, 1, 3);
    double count = 0;
    for (float v : d.v) count += v;
    CHECK(count == 29.0);  // |{(di,dj): di^2+dj^2 <= 9}|
    CHECK(d.at(7, 7) == 1.0f);
    CHECK(d.at(7, 10) == 1.0f);
    CHECK(d.at(7, 11) == 0.0f);
}

TEST_CASE("fnv hash is stable and input-sensitive") {
    CHECK(hash_string_hex("abc") == hash_string_hex("abc"));
    CHECK(hash_string_hex("abc") != hash_string_hex("abd"));
    CHECK(hash_string_hex("").size() == 16);
}
