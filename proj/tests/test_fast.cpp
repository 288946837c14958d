#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <utility>

#include "flowvo/fast.hpp"
#include "flowvo/pyramid.hpp"
#include "support/matchers.hpp"
#include "support/oracles.hpp"

using namespace flowvo;

namespace {

GrayImage checkerboard(int w, int h, int cell) {
    GrayImage img = GrayImage::blank(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = (((x / cell) + (y / cell)) & 1) ? 230 : 25;
    return img;
}

} // namespace

TEST_CASE("constant images produce no keypoints") {
    const Pyramid pyr = build_pyramid(GrayImage::blank(128, 128, 90));
    CHECK(detect_keypoints(pyr, 100).empty());
}

TEST_CASE("an isolated bright square fires near its corners") {
    GrayImage img = GrayImage::blank(128, 128, 0);
    const int sx = 60, sy = 80; // square occupies [60,64] x [80,84]
    for (int y = sy; y <= sy + 4; ++y)
        for (int x = sx; x <= sx + 4; ++x) img.at(x, y) = 255;

    const Pyramid pyr = build_pyramid(img);
    const auto kps = detect_keypoints(pyr, 40);
    REQUIRE_FALSE(kps.empty());

    const double corners[4][2] = {{60, 80}, {64, 80}, {60, 84}, {64, 84}};
    for (const auto& c : corners) {
        bool found = false;
        for (const auto& kp : kps) {
            if (kp.level != 0) continue;
            const double d = std::hypot(kp.position.x - c[0], kp.position.y - c[1]);
            if (d <= 3.0) found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("keypoint count respects max_count and spreads over the image") {
    const Pyramid pyr = build_pyramid(checkerboard(640, 480, 8));
    const auto kps = detect_keypoints(pyr, 100);
    CHECK(kps.size() <= 100);
    CHECK(kps.size() >= 90); // rich texture should fill the budget

    std::set<std::pair<double, double>> positions;
    int quadrant[4] = {0, 0, 0, 0};
    for (const auto& kp : kps) {
        positions.insert({kp.position.x, kp.position.y});
        quadrant[(kp.position.x < 320 ? 0 : 1) + (kp.position.y < 240 ? 0 : 2)]++;
    }
    CHECK(positions.size() == kps.size()); // one corner per quadtree leaf
    for (int q : quadrant) CHECK(q >= 10);
}

TEST_CASE("every returned keypoint passes the segment test at its level") {
    const Pyramid pyr = build_pyramid(checkerboard(640, 480, 8));
    const auto kps = detect_keypoints(pyr, 150);
    REQUIRE_FALSE(kps.empty());
    for (const auto& kp : kps) {
        const GrayImage& lvl = pyr.levels[kp.level];
        const double fx = static_cast<double>(lvl.width) / pyr.levels[0].width;
        const double fy = static_cast<double>(lvl.height) / pyr.levels[0].height;
        const int lx = static_cast<int>(std::lround((kp.position.x + 0.5) * fx - 0.5));
        const int ly = static_cast<int>(std::lround((kp.position.y + 0.5) * fy - 0.5));
        CHECK(oracle::fast_corner(lvl, lx, ly, 7));
    }
}

TEST_CASE("results are sorted by score with row-major tie-breaks") {
    const Pyramid pyr = build_pyramid(checkerboard(640, 480, 8));
    const auto kps = detect_keypoints(pyr, 120);
    for (std::size_t i = 1; i < kps.size(); ++i) {
        const auto& a = kps[i - 1];
        const auto& b = kps[i];
        const bool ordered =
            a.score > b.score ||
            (a.score == b.score &&
             (a.position.y < b.position.y ||
              (a.position.y == b.position.y && a.position.x <= b.position.x)));
        CHECK(ordered);
    }
}

TEST_CASE("detection is deterministic") {
    const Pyramid pyr = build_pyramid(checkerboard(640, 480, 8));
    const auto a = detect_keypoints(pyr, 100);
    const auto b = detect_keypoints(pyr, 100);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].position.x == b[i].position.x);
        CHECK(a[i].position.y == b[i].position.y);
        CHECK(a[i].level == b[i].level);
        CHECK(a[i].score == b[i].score);
    }
}

TEST_CASE("occupied mask cells are skipped during redetection") {
    const Pyramid pyr = build_pyramid(checkerboard(640, 480, 8));
    OccupancyMask mask(640, 480);
    for (int y = 0; y < 480; ++y)
        for (int x = 0; x < 320; x += 8) mask.mark(PixelPoint{static_cast<double>(x), static_cast<double>(y)});
    const auto kps = detect_keypoints(pyr, 100, &mask);
    REQUIRE_FALSE(kps.empty());
    for (const auto& kp : kps) CHECK(kp.position.x >= 320.0);
}

TEST_CASE("mask marking and lookup agree on cell boundaries") {
    OccupancyMask mask(640, 480);
    mask.mark(PixelPoint{100.0, 100.0});
    CHECK(mask.occupied(PixelPoint{96.0, 96.0}));
    CHECK(mask.occupied(PixelPoint{111.9, 111.9}));
    CHECK_FALSE(mask.occupied(PixelPoint{112.0, 100.0}));
    CHECK_FALSE(mask.occupied(PixelPoint{100.0, 112.0}));
}

TEST_CASE("detect_keypoints validates max_count") {
    const Pyramid pyr = build_pyramid(GrayImage::blank(64, 64, 10));
    CHECK_THROWS_MATCHES(detect_keypoints(pyr, 0), Error, ErrorMatches(ErrorCode::InvalidInput));
}
