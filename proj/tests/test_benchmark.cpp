#include <doctest.h>

#include <cmath>

#include "ced/benchmark.hpp"
#include "oracles.hpp"

using namespace ced;

namespace {

BinaryMap sparse_map(Rng& rng, int h, int w, int max_on) {
    BinaryMap b(h, w);
    const int n = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_on) + 1));
    for (int i = 0; i < n; ++i) b.set(static_cast<int>(rng.below(h)), static_cast<int>(rng.below(w)), true);
    return b;
}

BinaryMap vertical_line(int h, int w, int x) {
    BinaryMap b(h, w);
    for (int y = 0; y < h; ++y) b.set(y, x, true);
    return b;
}

}  // namespace

TEST_CASE("thresholds are k/(K+1)") {
    EvalConfig cfg;
    const auto t = cfg.threshold_values();
    REQUIRE(t.size() == 33);
    CHECK(t.front() == doctest::Approx(1.0 / 34));
    CHECK(t.back() == doctest::Approx(33.0 / 34));
    cfg.thresholds = 1;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("tolerance labels") {
    CHECK(Tolerance{ToleranceKind::Pixel, 4.0}.label() == "4px");
    CHECK(Tolerance{ToleranceKind::Millimetre, 0.5}.label() == "0.5mm");
}

TEST_CASE("match_boundaries agrees with exhaustive matching") {
    Rng rng(77);
    for (int t = 0; t < 100; ++t) {
        const int h = 3 + static_cast<int>(rng.below(5)), w = 3 + static_cast<int>(rng.below(5));
        const BinaryMap pred = sparse_map(rng, h, w, 8), gt = sparse_map(rng, h, w, 8);
        const AdmissibilityRule rule = t % 2 ? px_rule(1.0 + rng.below(3)) : mm_to_px(1.0, Spacing{0.6, 0.9});
        const MatchCounts c = match_boundaries(pred, gt, rule);
        CHECK(c.tp_pred == oracle::max_matching(pred, gt, rule));
    }
}

TEST_CASE("match counts identities, symmetry and tolerance monotonicity") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const BinaryMap pred = oracle::random_map(rng, 12, 12, 0.15), gt = oracle::random_map(rng, 12, 12, 0.15);
        long prev = -1;
        for (double tol : {0.5, 1.0, 1.5, 2.0, 3.0, 5.0}) {
            const MatchCounts c = match_boundaries(pred, gt, tol);
            CHECK(c.tp_pred + c.fp == static_cast<long>(pred.count()));
            CHECK(c.tp_gt + c.fn == static_cast<long>(gt.count()));
            CHECK(c.tp_pred == c.tp_gt);
            CHECK(match_boundaries(gt, pred, tol).tp_pred == c.tp_pred);
            CHECK(c.tp_pred >= prev);
            prev = c.tp_pred;
        }
    }
}

TEST_CASE("empty maps") {
    const MatchCounts c = match_boundaries(BinaryMap(4, 4), BinaryMap(4, 4), 2.0);
    CHECK(c.precision() == 0.0);
    CHECK(c.recall() == 0.0);
    CHECK(c.f_measure() == 0.0);
    CHECK(f_measure(0.0, 0.0) == 0.0);
    CHECK(f_measure(1.0, 0.5) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("admissibility in millimetres") {
    const AdmissibilityRule r = mm_to_px(1.0, Spacing{0.5, 2.0});
    CHECK(r.admits(2, 0));
    CHECK_FALSE(r.admits(3, 0));
    CHECK_FALSE(r.admits(0, 1));
    CHECK_FALSE(r.admits(1, 1));
    CHECK(r.radius_rows() >= 2);
    CHECK(px_rule(1.0).admits(1, 0));
    CHECK_FALSE(px_rule(1.0).admits(1, 1));
    CHECK(px_rule(1.5).admits(1, 1));
}

TEST_CASE("prediction shift: perfect at tolerance >= shift, zero below") {
    EvalConfig cfg;
    cfg.tol_mm.clear();
    cfg.tol_px = {1.0, 2.0, 3.0, 4.0};
    const auto thr = cfg.threshold_values();
    for (int shift = 1; shift <= 3; ++shift) {
        const BinaryMap gt = vertical_line(10, 12, 3);
        const Tensor pred = vertical_line(10, 12, 3 + shift).to_tensor();
        const auto curves = pr_curve(pred, gt, cfg, std::nullopt, true);
        REQUIRE(curves.size() == 4);
        for (const auto& c : curves) {
            const auto s = dataset_summary({c.counts}, thr);
            const double want = c.tolerance.value >= shift ? 1.0 : 0.0;
            CHECK(s.ods == want);
            CHECK(s.ois == want);
            CHECK(s.ap == want);
        }
    }
}

TEST_CASE("dataset summary laws") {
    Rng rng(13);
    EvalConfig cfg;
    cfg.tol_mm.clear();
    cfg.tol_px = {2.0};
    const auto thr = cfg.threshold_values();
    for (int t = 0; t < 10; ++t) {
        std::vector<std::vector<MatchCounts>> per_image;
        for (int i = 0; i < 3; ++i) {
            BinaryMap gt = oracle::random_map(rng, 10, 10, 0.1);
            gt.set(0, 0, true);
            const Tensor p = oracle::random_tensor<float>(rng, 10, 10, 1, 0, 1);
            per_image.push_back(pr_curve(p, gt, cfg, std::nullopt, false)[0].counts);
        }
        const DatasetSummary s = dataset_summary(per_image, thr);
        double best = 0.0;
        for (const auto& pt : s.pooled) best = std::max(best, pt.f_measure);
        CHECK(s.ods == best);
        CHECK(s.ods >= 0.0);
        CHECK(s.ods <= 1.0);
        CHECK(s.ois >= 0.0);
        CHECK(s.ois <= 1.0);
        CHECK(s.ap >= 0.0);
        CHECK(s.ap <= 1.0);
        CHECK(s.ap == average_precision(s.pooled));
    }
}

TEST_CASE("average precision of a perfect and of an empty curve") {
    std::vector<PRPoint> perfect{{0.1, 1.0, 1.0, 1.0}, {0.5, 1.0, 1.0, 1.0}};
    CHECK(average_precision(perfect) == 1.0);
    std::vector<PRPoint> none{{0.1, 0.0, 0.0, 0.0}};
    CHECK(average_precision(none) == 0.0);
}

TEST_CASE("crispness profile ordering and monotonicity") {
    const std::vector<CrispnessRow> rows{{{ToleranceKind::Pixel, 1.0}, 0.5},
                                         {{ToleranceKind::Pixel, 4.0}, 0.9},
                                         {{ToleranceKind::Millimetre, 0.5}, 0.4},
                                         {{ToleranceKind::Pixel, 2.0}, 0.7},
                                         {{ToleranceKind::Millimetre, 1.0}, 0.6}};
    const CrispnessProfile p = crispness_profile(rows);
    REQUIRE(p.pixel.size() == 3);
    CHECK(p.pixel[0].tolerance.value == 4.0);
    CHECK(p.pixel[2].tolerance.value == 1.0);
    REQUIRE(p.millimetre.size() == 2);
    CHECK(p.millimetre[0].ods == 0.6);
    const std::vector<CrispnessRow> bad{{{ToleranceKind::Pixel, 4.0}, 0.5}, {{ToleranceKind::Pixel, 1.0}, 0.6}};
    CHECK_THROWS_AS(crispness_profile(bad), std::logic_error);
}

TEST_CASE("mm tolerances need a spacing") {
    EvalConfig cfg;
    const BinaryMap gt = vertical_line(8, 8, 2);
    CHECK(pr_curve(gt.to_tensor(), gt, cfg, std::nullopt, true).size() == 3);
    CHECK(pr_curve(gt.to_tensor(), gt, cfg, Spacing{1.0, 1.0}, true).size() == 5);
}
