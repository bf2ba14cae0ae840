#include <doctest.h>

#include "aabcos/metrics.hpp"
#include "oracles.hpp"

using namespace aabcos;

namespace {

std::vector<float> random_map(Rng& rng, std::int64_t h, std::int64_t w, double lo = -1.0, double hi = 1.0) {
    std::vector<float> m(static_cast<std::size_t>(h * w));
    for (auto& v : m) v = static_cast<float>(rng.uniform(lo, hi));
    return m;
}

BoundingBox random_box(Rng& rng, std::int64_t h, std::int64_t w, int class_id = 0) {
    BoundingBox b;
    b.w = 1 + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(w)));
    b.h = 1 + static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(h)));
    b.x = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(w - b.w + 1)));
    b.y = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(h - b.h + 1)));
    b.class_id = class_id;
    return b;
}

}  // namespace

TEST_CASE("classification metrics: perfect predictions score 1.0 everywhere") {
    ClassificationMetrics m = classification_metrics({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0});
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == 1.0);
}

TEST_CASE("classification metrics: F1 is the harmonic mean (0.5, 0.5 -> 0.5)") {
    // TP=1, FP=1, FN=1, TN=1
    ClassificationMetrics m = classification_metrics({0.9, 0.1, 0.9, 0.1}, {1, 1, 0, 0});
    CHECK(m.precision == 0.5);
    CHECK(m.recall == 0.5);
    CHECK(m.f1 == 0.5);
}

TEST_CASE("AUC via rank statistic: enumerated pair example gives 0.75") {
    ClassificationMetrics m = classification_metrics({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1});
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == doctest::Approx(0.75));
}

TEST_CASE("AUC averages tied ranks") {
    // positive and negative share score 0.5: the tie contributes half a win
    ClassificationMetrics m = classification_metrics({0.5, 0.5}, {1, 0});
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == doctest::Approx(0.5));
}

TEST_CASE("single-class labels leave AUC missing but compute the rest") {
    ClassificationMetrics m = classification_metrics({0.9, 0.8}, {1, 1});
    CHECK_FALSE(m.auc.has_value());
    CHECK(m.accuracy == 1.0);
    CHECK(m.recall == 1.0);
}

TEST_CASE("epg_general: uniform map scores the box area fraction") {
    std::vector<float> map(8 * 8, 1.0f);
    std::vector<BoundingBox> boxes = {{0, 0, 4, 4, 0}};  // 16 of 64 pixels
    auto v = epg_general(map, 8, 8, boxes);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(0.25));
}

TEST_CASE("epg_general: all mass inside the box scores 1.0") {
    std::vector<float> map(16, 0.0f);
    map[5] = 2.0f;
    map[6] = 1.0f;
    std::vector<BoundingBox> boxes = {{1, 1, 2, 1, 0}};  // covers (1,1)-(2,1) = flat 5,6
    auto v = epg_general(map, 4, 4, boxes);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(1.0));
}

TEST_CASE("epg_general: zero total mass is undefined") {
    std::vector<float> map(16, 0.0f);
    std::vector<BoundingBox> boxes = {{0, 0, 2, 2, 0}};
    CHECK_FALSE(epg_general(map, 4, 4, boxes).has_value());
    CHECK_FALSE(epg_general(std::vector<float>(16, 1.0f), 4, 4, {}).has_value());
}

TEST_CASE("epg_precision hand cases") {
    // [[2,-5],[1,0]], box = top-left cell, t=0: 2/(2+1)
    std::vector<float> map = {2.0f, -5.0f, 1.0f, 0.0f};
    std::vector<BoundingBox> box = {{0, 0, 1, 1, 0}};
    auto v = epg_precision(map, 2, 2, box, 0.0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(2.0 / 3.0));

    // all positives inside the box: 1.0 at every threshold
    std::vector<float> inside = {3.0f, -1.0f, 0.0f, -2.0f};
    for (double t : {0.0, 0.3, 0.9}) {
        auto u = epg_precision(inside, 2, 2, box, t);
        REQUIRE(u.has_value());
        CHECK(*u == doctest::Approx(1.0));
    }

    // t=0.5 with max positive 4: cells <= 2 drop out
    std::vector<float> thr = {4.0f, 2.0f, 1.0f, 3.0f};
    std::vector<BoundingBox> left = {{0, 0, 1, 2, 0}};  // column 0: values 4 and 1
    auto w = epg_precision(thr, 2, 2, left, 0.5);
    REQUIRE(w.has_value());
    CHECK(*w == doctest::Approx(4.0 / 7.0));  // survivors: 4 (in), 3 (out)

    CHECK_FALSE(epg_precision({-1.0f, -2.0f, 0.0f, -3.0f}, 2, 2, box, 0.0).has_value());
    CHECK_FALSE(epg_precision(thr, 2, 2, left, 1.0).has_value());  // nothing survives t=1
}

TEST_CASE("epg_recall hand cases") {
    std::vector<BoundingBox> box = {{0, 0, 2, 1, 0}};  // cells 0 and 1
    auto v = epg_recall({3.0f, -1.0f, 9.0f, -9.0f}, 2, 2, box, 0.0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(0.75));

    auto all_pos = epg_recall({3.0f, 1.0f, -9.0f, 0.0f}, 2, 2, box, 0.0);
    REQUIRE(all_pos.has_value());
    CHECK(*all_pos == doctest::Approx(1.0));

    auto all_neg = epg_recall({-3.0f, -1.0f, 9.0f, 0.0f}, 2, 2, box, 0.0);
    REQUIRE(all_neg.has_value());
    CHECK(*all_neg == doctest::Approx(0.0));

    CHECK_FALSE(epg_recall({0.0f, 0.0f, 9.0f, -1.0f}, 2, 2, box, 0.0).has_value());
}

TEST_CASE("strict threshold: zeros never count and t=0 keeps every positive") {
    std::vector<float> map = {1.0f, 0.0f, 0.0f, 2.0f};
    std::vector<BoundingBox> box = {{0, 0, 1, 1, 0}};
    auto v = epg_precision(map, 2, 2, box, 0.0);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("EPG ops equal the brute-force double loops on random triples") {
    Rng rng(55);
    int defined = 0;
    for (int trial = 0; trial < 300; ++trial) {
        std::int64_t h = 3 + static_cast<std::int64_t>(rng.uniform_index(14));
        std::int64_t w = 3 + static_cast<std::int64_t>(rng.uniform_index(14));
        auto map = random_map(rng, h, w);
        std::vector<BoundingBox> boxes = {random_box(rng, h, w)};
        if (trial % 3 == 0) boxes.push_back(random_box(rng, h, w));  // overlaps count once
        double t = rng.uniform();

        auto check_pair = [&](std::optional<double> got, std::optional<double> want) {
            REQUIRE(got.has_value() == want.has_value());
            if (got) {
                CHECK(std::abs(*got - *want) <= 1e-12);
                ++defined;
            }
        };
        check_pair(epg_general(map, h, w, boxes), oracles::brute_epg_general(map, h, w, boxes));
        check_pair(epg_precision(map, h, w, boxes, t), oracles::brute_epg_precision(map, h, w, boxes, t));
        check_pair(epg_recall(map, h, w, boxes, t), oracles::brute_epg_recall(map, h, w, boxes, t));
    }
    CHECK(defined > 500);
}

TEST_CASE("EPG values stay in [0,1]: precision/recall always, general on non-negative maps") {
    Rng rng(66);
    for (int trial = 0; trial < 100; ++trial) {
        std::int64_t h = 4 + static_cast<std::int64_t>(rng.uniform_index(8));
        std::int64_t w = 4 + static_cast<std::int64_t>(rng.uniform_index(8));
        auto signed_map = random_map(rng, h, w);
        std::vector<BoundingBox> boxes = {random_box(rng, h, w)};
        double t = rng.uniform();
        if (auto v = epg_precision(signed_map, h, w, boxes, t)) {
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0);
        }
        if (auto v = epg_recall(signed_map, h, w, boxes, t)) {
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0);
        }
        auto nonneg = random_map(rng, h, w, 0.0, 1.0);
        if (auto v = epg_general(nonneg, h, w, boxes)) {
            CHECK(*v >= 0.0);
            CHECK(*v <= 1.0);
        }
    }
}

TEST_CASE("EPG scale invariance") {
    Rng rng(67);
    auto map = random_map(rng, 6, 6);
    std::vector<BoundingBox> boxes = {{1, 2, 3, 2, 0}};
    auto scaled = map;
    for (auto& v : scaled) v *= 2.0f;  // power of two: sums scale exactly
    CHECK(*epg_general(map, 6, 6, boxes) == *epg_general(scaled, 6, 6, boxes));
    CHECK(*epg_precision(map, 6, 6, boxes, 0.4) == *epg_precision(scaled, 6, 6, boxes, 0.4));
    CHECK(*epg_recall(map, 6, 6, boxes, 0.4) == *epg_recall(scaled, 6, 6, boxes, 0.4));

    auto scaled17 = map;
    for (auto& v : scaled17) v *= 1.7f;
    CHECK(*epg_precision(map, 6, 6, boxes, 0.4) ==
          doctest::Approx(*epg_precision(scaled17, 6, 6, boxes, 0.4)).epsilon(1e-6));
}

TEST_CASE("enlarging a box never decreases epg_general on non-negative maps") {
    Rng rng(68);
    auto map = random_map(rng, 8, 8, 0.0, 1.0);
    double prev = 0.0;
    for (std::int64_t grow = 1; grow <= 8; ++grow) {
        std::vector<BoundingBox> boxes = {{0, 0, grow, grow, 0}};
        auto v = epg_general(map, 8, 8, boxes);
        REQUIRE(v.has_value());
        CHECK(*v >= prev - 1e-12);
        prev = *v;
    }
}

TEST_CASE("bounding boxes must lie inside the image") {
    std::vector<float> map(16, 1.0f);
    CHECK_THROWS_AS(epg_general(map, 4, 4, {{2, 2, 4, 4, 0}}), DataError);
    CHECK_THROWS_AS(epg_general(map, 4, 4, {{0, 0, 0, 1, 0}}), DataError);
}

TEST_CASE("EpgConfig validation") {
    EpgConfig bad;
    bad.thresholds = {0.2, 0.1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.thresholds = {0.1, 0.1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.thresholds = {0.1, 1.5};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.thresholds = {};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("epg_evaluate: single sample rows equal the scalar ops and aggregates recompute") {
    Rng rng(69);
    EpgSample s;
    s.sample_id = "s0";
    s.class_id = 1;
    s.height = s.width = 8;
    s.map = random_map(rng, 8, 8);
    s.boxes = {{1, 1, 3, 3, 1}};
    s.predicted_positive = true;

    EpgConfig cfg;
    cfg.thresholds = {0.0, 0.5};
    EpgReport r = epg_evaluate({s}, cfg);
    REQUIRE(r.records.size() == 2);
    for (const auto& rec : r.records) {
        CHECK(rec.general == epg_general(s.map, 8, 8, s.boxes));
        CHECK(rec.precision == epg_precision(s.map, 8, 8, s.boxes, rec.threshold));
        CHECK(rec.recall == epg_recall(s.map, 8, 8, s.boxes, rec.threshold));
    }
    auto again = aggregate_epg_records(r.records, cfg);
    REQUIRE(again.size() == r.aggregates.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
        CHECK(again[i].mean == r.aggregates[i].mean);
        CHECK(again[i].stddev == r.aggregates[i].stddev);
        CHECK(again[i].n == r.aggregates[i].n);
    }
    // TP subset carries the sample, FN subset is empty
    const EpgAggregate& tp = *std::find_if(r.aggregates.begin(), r.aggregates.end(), [](const auto& a) {
        return a.metric == "epg_precision" && a.subset == "tp" && a.threshold == 0.0;
    });
    CHECK(tp.n == 1);
    const EpgAggregate& fn = *std::find_if(r.aggregates.begin(), r.aggregates.end(), [](const auto& a) {
        return a.metric == "epg_precision" && a.subset == "fn" && a.threshold == 0.0;
    });
    CHECK(fn.n == 0);
}

TEST_CASE("epg_evaluate skips positives without boxes and counts them") {
    EpgSample s;
    s.sample_id = "nobox";
    s.class_id = 0;
    s.height = s.width = 4;
    s.map.assign(16, 1.0f);
    EpgConfig cfg;
    cfg.thresholds = {0.0};
    EpgReport r = epg_evaluate({s}, cfg);
    CHECK(r.records.empty());
    CHECK(r.skipped_missing_boxes == 1);
}
