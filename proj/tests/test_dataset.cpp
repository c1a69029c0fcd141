#include <catch2/catch_amalgamated.hpp>

#include "xaieval/dataset.hpp"

using namespace xaieval;

TEST_CASE("dataset regeneration is bit-identical") {
    const Dataset a = gen_shapes_dataset(7, 10, 64, 2);
    const Dataset b = gen_shapes_dataset(7, 10, 64, 2);
    REQUIRE(a.total() == b.total());
    CHECK(dataset_hash_hex(a) == dataset_hash_hex(b));
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].image.v == b.train[i].image.v);
        CHECK(a.train[i].mask.labels == b.train[i].mask.labels);
    }
    const Dataset c = gen_shapes_dataset(8, 10, 64, 2);
    CHECK(dataset_hash_hex(a) != dataset_hash_hex(c));
}

TEST_CASE("class-1 pixel fraction stays within construction bounds") {
    const Dataset ds = gen_shapes_dataset(7, 200, 64, 2);
    auto check_items = [](const std::vector<DataItem>& items) {
        for (const auto& it : items) {
            std::int64_t fg = 0;
            for (auto l : it.mask.labels) fg += (l == 1);
            const double frac = static_cast<double>(fg) / static_cast<double>(it.mask.labels.size());
            CHECK(frac >= 0.05);
            CHECK(frac <= 0.5);
        }
    };
    check_items(ds.train);
    check_items(ds.val);
    check_items(ds.test);
}

TEST_CASE("mask dims equal image dims and values are valid") {
    const Dataset ds = gen_shapes_dataset(3, 12, 48, 3);
    auto check_items = [](const std::vector<DataItem>& items, int K) {
        for (const auto& it : items) {
            CHECK(it.mask.h == it.image.h);
            CHECK(it.mask.w == it.image.w);
            CHECK(it.mask.num_classes == K);
            for (float v : it.image.v) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
            for (auto l : it.mask.labels) {
                CHECK(l >= 0);
                CHECK(l < K);
            }
        }
    };
    check_items(ds.train, 3);
    check_items(ds.val, 3);
    check_items(ds.test, 3);
}

TEST_CASE("split sizes follow the 70/15/15 layout") {
    const Dataset ds = gen_shapes_dataset(1, 200, 64, 2);
    CHECK(ds.train.size() == 140);
    CHECK(ds.val.size() == 30);
    CHECK(ds.test.size() == 30);
    // ids are globally unique across splits
    std::vector<std::int64_t> ids;
    for (const auto& it : ds.train) ids.push_back(it.id);
    for (const auto& it : ds.val) ids.push_back(it.id);
    for (const auto& it : ds.test) ids.push_back(it.id);
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("generator argument validation") {
    CHECK_THROWS_AS(gen_shapes_dataset(1, 0, 64, 2), std::invalid_argument);
    CHECK_THROWS_AS(gen_shapes_dataset(1, 5, 16, 2), std::invalid_argument);
    CHECK_THROWS_AS(gen_shapes_dataset(1, 5, 64, 4), std::invalid_argument);
}
