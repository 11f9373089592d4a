#include <doctest.h>

#include <random>

#include "oracles.hpp"

using namespace lposs;

namespace {

LabelMap random_map(Index h, Index w, Index classes, std::mt19937& rng, double ignore_rate = 0.0) {
    std::uniform_real_distribution<double> u(0, 1);
    LabelMap m(h, w);
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            m(y, x) = u(rng) < ignore_rate ? 255 : static_cast<std::int32_t>(rng() % classes);
    return m;
}

LabelMap square(Index size, Index y0, Index x0, Index side) {
    LabelMap m(size, size);
    for (Index y = y0; y < y0 + side; ++y)
        for (Index x = x0; x < x0 + side; ++x)
            m(y, x) = 1;
    return m;
}

} // namespace

TEST_CASE("accumulate and miou examples") {
    LabelMap gt(4, 4);
    gt.labels().rightCols(2).setConstant(1);
    {
        ConfusionAccumulator acc(2);
        acc.accumulate(gt, gt);
        CHECK(acc.counts()(0, 1) == 0);
        CHECK(acc.counts()(1, 0) == 0);
        CHECK(acc.counts().trace() == 16);
        CHECK(miou(acc).mean == 100.0);
    }
    {
        ConfusionAccumulator acc(2);
        acc.accumulate(LabelMap(4, 4, 0), gt);
        const IouReport r = miou(acc);
        CHECK(*r.per_class[0] == doctest::Approx(50.0));
        CHECK(*r.per_class[1] == 0.0);
        CHECK(r.mean == doctest::Approx(25.0));
    }
    {
        ConfusionAccumulator acc(2);
        acc.accumulate(LabelMap(4, 4, 1), LabelMap(4, 4, 255));
        CHECK(acc.total() == 0);
        CHECK_THROWS_AS(miou(acc), ValidationError);
    }
    {
        ConfusionAccumulator acc(3);
        acc.accumulate(gt, gt);
        const IouReport r = miou(acc);
        CHECK(!r.per_class[2].has_value());
        CHECK(r.mean == 100.0);
    }
    {
        ConfusionAccumulator acc(2);
        CHECK_THROWS_AS(acc.accumulate(LabelMap(4, 4, 2), gt), ValidationError);
        CHECK_THROWS_AS(acc.accumulate(LabelMap(3, 4, 0), gt), ValidationError);
        CHECK(acc.total() == 0);
    }
}

TEST_CASE("miou equals a set-based oracle; order independence; merge") {
    std::mt19937 rng(8);
    std::vector<std::pair<LabelMap, LabelMap>> pairs;
    for (int t = 0; t < 30; ++t)
        pairs.emplace_back(random_map(8, 8, 3, rng), random_map(8, 8, 3, rng, 0.1));
    for (const auto& [p, g] : pairs) {
        ConfusionAccumulator acc(3);
        acc.accumulate(p, g);
        CHECK(miou(acc).mean == doctest::Approx(oracle::brute_miou(p, g, 3)).epsilon(1e-12));
    }
    ConfusionAccumulator fwd(3), rev(3), a(3), b(3);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        fwd.accumulate(pairs[i].first, pairs[i].second);
        rev.accumulate(pairs[pairs.size() - 1 - i].first, pairs[pairs.size() - 1 - i].second);
        (i % 2 ? a : b).accumulate(pairs[i].first, pairs[i].second);
    }
    a.merge(b);
    CHECK(fwd.counts() == rev.counts());
    CHECK(fwd.counts() == a.counts());
}

TEST_CASE("ignore predictions count as misses") {
    LabelMap gt(2, 2, 0);
    LabelMap pred(2, 2, 0);
    pred(0, 0) = 255;
    ConfusionAccumulator acc(1);
    acc.accumulate(pred, gt);
    CHECK(acc.total() == 4);
    CHECK(*miou(acc).per_class[0] == doctest::Approx(75.0));
}

TEST_CASE("band width and mask boundary") {
    CHECK(boundary_band_width(64, 64, {}) == 2);
    CHECK(boundary_band_width(10, 10, {}) == 1);
    CHECK(boundary_band_width(500, 375, {}) == 13);

    std::mt19937 rng(3);
    for (int t = 0; t < 20; ++t) {
        const LabelMap m = random_map(12, 9, 2, rng);
        BoolMask mask = (m.labels().array() == 1);
        for (Index d : {1, 2, 3}) {
            const BoolMask band = mask_boundary(mask, d);
            const oracle::PixelSet ref = oracle::brute_band(oracle::class_set(m, 1), 12, 9, d);
            for (Index y = 0; y < 12; ++y)
                for (Index x = 0; x < 9; ++x)
                    CHECK(band(y, x) == (ref.count({y, x}) == 1));
        }
    }
}

TEST_CASE("boundary IoU examples") {
    const LabelMap a = square(40, 5, 5, 20);
    const IouReport same = boundary_iou(a, a, 2);
    CHECK(*same.per_class[0] == 1.0);
    CHECK(*same.per_class[1] == 1.0);

    LabelMap left(8, 8, 0), right(8, 8, 1);
    const IouReport disjoint = boundary_iou(left, right, 2);
    CHECK(*disjoint.per_class[0] == 0.0);
    CHECK(*disjoint.per_class[1] == 0.0);

    const LabelMap b = square(40, 7, 5, 20);
    const BoundaryParams one{1e-9, 1};
    const IouReport shifted = boundary_iou(b, a, 2, one);
    std::vector<double> per_class;
    oracle::brute_boundary_iou(b, a, 2, 1, &per_class);
    REQUIRE(per_class.size() == 2);
    CHECK(*shifted.per_class[0] == per_class[0]);
    CHECK(*shifted.per_class[1] == per_class[1]);
}

TEST_CASE("boundary IoU equals the brute-force band oracle") {
    std::mt19937 rng(4);
    for (int t = 0; t < 20; ++t) {
        const LabelMap p = random_map(16, 16, 3, rng);
        const LabelMap g = random_map(16, 16, 3, rng);
        const Index d = boundary_band_width(16, 16, {});
        const IouReport r = boundary_iou(p, g, 3);
        CHECK(100.0 * r.mean == doctest::Approx(oracle::brute_boundary_iou(p, g, 3, d)).epsilon(1e-12));
        for (const auto& v : r.per_class)
            if (v) {
                CHECK(*v >= 0.0);
                CHECK(*v <= 1.0);
            }
    }
}

TEST_CASE("boundary accumulator over one image matches per-image value") {
    std::mt19937 rng(5);
    const LabelMap p = random_map(16, 16, 2, rng);
    const LabelMap g = random_map(16, 16, 2, rng);
    BoundaryAccumulator acc(2);
    acc.accumulate(p, g);
    CHECK(acc.report().mean == doctest::Approx(100.0 * boundary_iou(p, g, 2).mean).epsilon(1e-12));
}

TEST_CASE("oracle patch resolution") {
    const LabelMap constant(64, 64, 3);
    const OracleResult c = oracle_patch_resolution(constant, 16);
    CHECK(c.miou == 100.0);
    CHECK(c.boundary_iou == 100.0);

    LabelMap blocks(64, 48);
    for (Index y = 0; y < 64; ++y)
        for (Index x = 0; x < 48; ++x)
            blocks(y, x) = static_cast<std::int32_t>((y / 16 + x / 16) % 2);
    const OracleResult b = oracle_patch_resolution(blocks, 16);
    CHECK(b.miou == 100.0);
    CHECK(b.boundary_iou == 100.0);

    LabelMap diag(64, 64);
    for (Index y = 0; y < 64; ++y)
        for (Index x = 0; x < 64; ++x)
            diag(y, x) = x > y ? 1 : 0;
    const LabelMap round_trip = patch_resolution_roundtrip(diag, 16);
    const OracleResult d = oracle_patch_resolution(diag, 16);
    CHECK(d.miou == doctest::Approx(oracle::brute_miou(round_trip, diag, 2)).epsilon(1e-12));
    CHECK(d.boundary_iou == doctest::Approx(oracle::brute_boundary_iou(round_trip, diag, 2, 2)).epsilon(1e-12));
}

TEST_CASE("oracle mIoU does not increase with coarser nested patches") {
    std::mt19937 rng(6);
    for (int t = 0; t < 10; ++t) {
        // Structure at 4-pixel granularity; patches 1, 2, 4, 8, 16, 32 nest.
        LabelMap coarse = random_map(16, 16, 3, rng);
        const LabelMap gt = label_upsample_nearest(coarse, 64, 64);
        double prev = 101.0;
        for (Index p : {1, 2, 4, 8, 16, 32}) {
            const double v = oracle_patch_resolution(gt, p, 3).miou;
            CHECK(v <= prev + 1e-12);
            prev = v;
        }
    }
}
