#include <doctest.h>

#include <cmath>

#include "ced/geometry.hpp"
#include "oracles.hpp"

using namespace ced;

namespace {

BinaryMap from_rows(const std::vector<std::string>& rows) {
    BinaryMap b(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int y = 0; y < b.height(); ++y)
        for (int x = 0; x < b.width(); ++x) b.set(y, x, rows[y][x] == '#');
    return b;
}

bool subset(const BinaryMap& a, const BinaryMap& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] && !b[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("boundary_from_mask keeps on-pixels with an off or outside 4-neighbour") {
    const BinaryMap mask = from_rows({".....", ".###.", ".###.", ".###.", "....."});
    const BinaryMap b = boundary_from_mask(mask);
    CHECK(b == from_rows({".....", ".###.", ".#.#.", ".###.", "....."}));
    CHECK(boundary_from_mask(BinaryMap(4, 4)).count() == 0);
    BinaryMap full(3, 3, std::vector<std::uint8_t>(9, 1));
    CHECK(boundary_from_mask(full) == from_rows({"###", "#.#", "###"}));
}

TEST_CASE("boundary_from_mask is a subset of the mask") {
    Rng rng(2);
    for (int t = 0; t < 30; ++t) {
        const BinaryMap m = oracle::random_map(rng, 12, 9, 0.6);
        CHECK(subset(boundary_from_mask(m), m));
    }
}

TEST_CASE("euclidean_dt examples") {
    SUBCASE("single source on a line") {
        const DistanceField d = euclidean_dt(from_rows({"#.."}));
        CHECK(d.at(0, 0) == 0.0);
        CHECK(d.at(0, 1) == 1.0);
        CHECK(d.at(0, 2) == 2.0);
    }
    SUBCASE("diagonal distance") {
        const DistanceField d = euclidean_dt(from_rows({"#..", "...", "..."}));
        CHECK(d.squared_at(2, 2) == 8.0);
        CHECK(d.at(2, 2) == doctest::Approx(std::sqrt(8.0)));
    }
    SUBCASE("anisotropic spacing") {
        const DistanceField d = euclidean_dt(from_rows({"#.", ".."}), Spacing{0.5, 1.0});
        CHECK(d.at(1, 1) == doctest::Approx(std::sqrt(0.25 + 1.0)));
        CHECK(d.at(1, 1) == doctest::Approx(1.118).epsilon(1e-3));
    }
    SUBCASE("empty source is an error") { CHECK_THROWS_AS(euclidean_dt(BinaryMap(3, 3)), std::invalid_argument); }
}

TEST_CASE("euclidean_dt equals the brute-force oracle exactly") {
    Rng rng(17);
    for (int t = 0; t < 60; ++t) {
        const int h = 1 + static_cast<int>(rng.below(20)), w = 1 + static_cast<int>(rng.below(20));
        BinaryMap src = oracle::random_map(rng, h, w, rng.uniform(0.01, 0.3));
        if (!src.any()) src.set(0, 0, true);
        const bool aniso = t % 3 == 0;
        const std::optional<Spacing> sp = aniso ? std::optional<Spacing>(Spacing{0.5, 1.25}) : std::nullopt;
        const DistanceField d = euclidean_dt(src, sp);
        const auto ref = oracle::squared_dt(src, sp);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(d.squared[i] == ref[i]);
    }
}

TEST_CASE("thin reduces a thick bar to a one-pixel line and is idempotent") {
    const BinaryMap bar = from_rows({"..........", ".########.", ".########.", ".########.", ".........."});
    const BinaryMap t = thin(bar);
    CHECK(t.any());
    CHECK(t.count() < bar.count());
    CHECK(subset(t, bar));
    CHECK(thin(t) == t);
}

TEST_CASE("thin keeps every 8-connected component, including 2x2 blocks") {
    CHECK(thin(from_rows({"##", "##"})).count() == 1);
    Rng rng(12);
    for (int t = 0; t < 40; ++t) {
        const BinaryMap b = oracle::random_map(rng, 14, 14, 0.45);
        const BinaryMap th = thin(b);
        CHECK(subset(th, b));
        CHECK(oracle::components(th) == oracle::components(b));
        CHECK(thin(th) == th);
    }
}

TEST_CASE("skeletonize of a one-pixel contour is the contour") {
    const BinaryMap ring = from_rows({"......", ".####.", ".#..#.", ".#..#.", ".####.", "......"});
    CHECK(skeletonize(ring) == ring);
}

TEST_CASE("nms_edges thins a blurred ridge and never increases values") {
    Tensor p(9, 9, 1);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) p.at(y, x, 0) = static_cast<float>(std::exp(-0.5 * (x - 4) * (x - 4)));
    const Tensor n = nms_edges(p);
    for (int y = 1; y < 8; ++y) {
        CHECK(n.at(y, 4, 0) == p.at(y, 4, 0));
        CHECK(n.at(y, 3, 0) == 0.0f);
        CHECK(n.at(y, 5, 0) == 0.0f);
    }
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        const Tensor r = oracle::random_tensor<float>(rng, 10, 11, 1, 0.0, 1.0);
        const Tensor s = nms_edges(r);
        for (std::size_t i = 0; i < r.size(); ++i) {
            CHECK(s[i] <= r[i]);
            if (r[i] == 0.0f) CHECK(s[i] == 0.0f);
        }
    }
}

TEST_CASE("nms_edges keeps constant regions") {
    const Tensor c(5, 5, 1, 0.3f);
    CHECK(nms_edges(c) == c);
}

TEST_CASE("maxpool_pyramid") {
    SUBCASE("all-zero stays zero") {
        for (const auto& level : maxpool_pyramid(BinaryMap(8, 8), 3)) CHECK(!level.any());
    }
    SUBCASE("a single pixel survives at every level") {
        BinaryMap b(8, 8);
        b.set(5, 2, true);
        for (const auto& level : maxpool_pyramid(b, 4)) CHECK(level.count() == 1);
    }
    SUBCASE("random maps equal the blockwise oracle") {
        Rng rng(31);
        for (int t = 0; t < 20; ++t) {
            const BinaryMap b = oracle::random_map(rng, 16, 8, 0.1);
            const auto pyr = maxpool_pyramid(b, 3);
            REQUIRE(pyr.size() == 3);
            CHECK(pyr[0] == b);
            CHECK(pyr[1] == oracle::block_max(pyr[0]));
            CHECK(pyr[2] == oracle::block_max(pyr[1]));
            for (const auto& level : pyr) CHECK(level.any() == b.any());
        }
    }
    SUBCASE("indivisible sizes are rejected") { CHECK_THROWS(maxpool_pyramid(BinaryMap(6, 6), 3)); }
}

TEST_CASE("dilate grows by a square") {
    BinaryMap b(5, 5);
    b.set(2, 2, true);
    CHECK(dilate(b, 1).count() == 9);
    CHECK(dilate(b, 0) == b);
}
