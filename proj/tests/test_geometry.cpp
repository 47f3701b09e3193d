#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "oracles.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/geometry.hpp"
#include "shmpipe/rng.hpp"

using namespace shmpipe;
using testutil::mask_from_rows;

TEST_SUITE("geometry") {

TEST_CASE("connected components split touching and separate blobs") {
    MaskLayer mask = mask_from_rows({"1100011",
                                     "1100010",
                                     "0000100",
                                     "0110000",
                                     "0110000"},
                                    CodeTable::Binary);
    auto instances = connected_components(mask, 1);
    // the diagonal chain on the right is one 8-connected blob
    REQUIRE(instances.size() == 3);
    CHECK(instances[0].pixels.front() == PixelPoint{0, 0});
    CHECK(instances[0].pixels.size() == 4);
    CHECK(instances[1].pixels.size() == 4);
    CHECK(instances[1].bbox == PixelRect{4, 0, 3, 3});
    CHECK(instances[2].bbox == PixelRect{1, 3, 2, 2});
    for (std::size_t i = 0; i < instances.size(); ++i)
        CHECK(instances[i].id == static_cast<int>(i));
}

TEST_CASE("connected components agree with the flood-fill oracle") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        int w = 3 + static_cast<int>(rng.next_below(30));
        int h = 3 + static_cast<int>(rng.next_below(30));
        MaskLayer mask = MaskLayer::make(w, h, CodeTable::Binary);
        for (auto& code : mask.codes) code = rng.next_unit() < 0.4 ? 1 : 0;

        auto got = connected_components(mask, 1);
        auto expected = testoracle::flood_components(mask, 1);
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            // library pixels are already in raster order; oracle sorts its own
            CHECK(got[i].pixels == expected[i]);
            int min_x = w, min_y = h, max_x = -1, max_y = -1;
            for (auto p : expected[i]) {
                min_x = std::min(min_x, p.x);
                min_y = std::min(min_y, p.y);
                max_x = std::max(max_x, p.x);
                max_y = std::max(max_y, p.y);
            }
            CHECK(got[i].bbox == PixelRect{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1});
        }
    }
}

TEST_CASE("connected components of an absent code is empty") {
    MaskLayer mask = mask_from_rows({"000", "000"}, CodeTable::Binary);
    CHECK(connected_components(mask, 1).empty());
    CHECK_THROWS_AS(connected_components(mask, 9), Error);
}

TEST_CASE("min area rect on canonical shapes") {
    // single pixel
    std::vector<PixelPoint> single = {{5, 9}};
    RotatedRect r = min_area_rect(single);
    CHECK(r.w == doctest::Approx(1.0));
    CHECK(r.h == doctest::Approx(1.0));
    CHECK(r.cx == doctest::Approx(5.0));
    CHECK(r.cy == doctest::Approx(9.0));

    // axis-aligned 10x4 block: footprint size, angle 0
    std::vector<PixelPoint> block;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 10; ++x) block.push_back({x + 3, y + 7});
    r = min_area_rect(block);
    CHECK(r.w == doctest::Approx(10.0));
    CHECK(r.h == doctest::Approx(4.0));
    CHECK(r.angle_deg == doctest::Approx(0.0));
    CHECK(r.cx == doctest::Approx(7.5));
    CHECK(r.cy == doctest::Approx(8.5));

    // taller than wide: canonical form swaps to w >= h
    std::vector<PixelPoint> tall;
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 3; ++x) tall.push_back({x, y});
    r = min_area_rect(tall);
    CHECK(r.w == doctest::Approx(9.0));
    CHECK(r.h == doctest::Approx(3.0));
    CHECK(r.angle_deg >= -90.0);
    CHECK(r.angle_deg < 90.0);

    // 45-degree diagonal line
    std::vector<PixelPoint> diag;
    for (int i = 0; i < 8; ++i) diag.push_back({i, i});
    r = min_area_rect(diag);
    CHECK(std::abs(std::abs(r.angle_deg) - 45.0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(r.w == doctest::Approx(7.0 * std::sqrt(2.0) + 1.0));
    CHECK(r.h == doctest::Approx(1.0));

    CHECK_THROWS_AS(min_area_rect({}), Error);
}

TEST_CASE("min area rect stays within 1% of the angle sweep") {
    SplitMix64 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 3 + static_cast<int>(rng.next_below(60));
        std::vector<PixelPoint> points;
        for (int i = 0; i < n; ++i)
            points.push_back({static_cast<int>(rng.next_below(48)),
                              static_cast<int>(rng.next_below(48))});
        RotatedRect rect = min_area_rect(points);
        double sweep = testoracle::sweep_min_area(points);
        CHECK(std::abs(rect.area() - sweep) <= sweep * 0.01 + 1e-9);
        // canonical form
        CHECK(rect.w >= rect.h - 1e-9);
        CHECK(rect.angle_deg >= -90.0);
        CHECK(rect.angle_deg < 90.0);
        // every point inside with half-pixel margin
        for (auto p : points) CHECK(rect.contains(p.x, p.y, 0.5));
    }
}

TEST_CASE("rotated rect corners and containment") {
    RotatedRect rect{10.0, 20.0, 8.0, 4.0, 0.0};
    auto corners = rect.corners();
    CHECK(corners[0][0] == doctest::Approx(6.0));
    CHECK(corners[0][1] == doctest::Approx(18.0));
    CHECK(corners[2][0] == doctest::Approx(14.0));
    CHECK(corners[2][1] == doctest::Approx(22.0));
    CHECK(rect.contains(10.0, 20.0));
    CHECK(rect.contains(14.0, 22.0));
    CHECK_FALSE(rect.contains(14.1, 22.0));
    CHECK(rect.contains(14.1, 22.0, 0.2));

    RotatedRect rot{0.0, 0.0, 10.0, 2.0, 90.0};
    // long axis now vertical
    CHECK(rot.contains(0.0, 4.9));
    CHECK_FALSE(rot.contains(4.9, 0.0));
}

TEST_CASE("warp of the identity rect is exact") {
    Raster src = testutil::patterned_rgb(24, 24);
    RotatedRect identity{11.5, 11.5, 24.0, 24.0, 0.0};
    Raster out = warp_to_square(src, identity, 24);
    CHECK(out == src);
}

TEST_CASE("warp output size and background") {
    Raster src = testutil::patterned_rgb(16, 16);
    RotatedRect rect{8.0, 8.0, 10.0, 10.0, 30.0};
    Raster out = warp_to_square(src, rect, 224);
    CHECK(out.width == 224);
    CHECK(out.height == 224);
    CHECK(out.channels == 3);

    // a rect hanging outside the frame samples black there
    RotatedRect outside{-20.0, -20.0, 8.0, 8.0, 0.0};
    Raster black = warp_to_square(src, outside, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) CHECK(black.at(x, y, c) == 0);

    CHECK_THROWS_AS(warp_to_square(src, rect, 0), Error);
    CHECK_THROWS_AS(warp_to_square(src, RotatedRect{4, 4, 0, 4, 0}, 8), Error);
}

TEST_CASE("warp maps a 90-degree rect by rotating the content") {
    Raster src = Raster::make(6, 6, 1);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) src.at(x, y) = static_cast<std::uint8_t>(10 * y + x);
    RotatedRect rot{2.5, 2.5, 6.0, 6.0, 90.0};
    Raster out = warp_to_square(src, rot, 6);
    // with the frame turned 90 degrees, (i, j) samples source (5 - j, i)
    for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) CHECK(out.at(i, j) == src.at(5 - j, i));
}

TEST_CASE("nearest sampling keeps discrete codes") {
    Raster src = Raster::make(9, 9, 1);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) src.at(x, y) = (x + y) % 2 ? 7 : 3;
    RotatedRect rect{4.0, 4.0, 7.0, 5.0, 33.0};
    Raster out = warp_to_square(src, rect, 21, Sampling::Nearest);
    for (int y = 0; y < 21; ++y)
        for (int x = 0; x < 21; ++x) {
            bool known = out.at(x, y) == 7 || out.at(x, y) == 3 || out.at(x, y) == 0;
            CHECK(known);
        }
}

TEST_CASE("checkerboard corners land on the right cells") {
    // 64x64 board of 16-px cells, value 0 or 200
    Raster board = Raster::make(64, 64, 1);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            board.at(x, y) = ((x / 16 + y / 16) % 2) ? 200 : 0;
    // axis-aligned rect centered mid-board, corners deep inside four cells
    RotatedRect rect{31.5, 31.5, 32.0, 32.0, 0.0};
    Raster out = warp_to_square(board, rect, 32);
    // top-left output pixel samples source (16, 16): cell (1,1) -> 0
    CHECK(std::abs(out.at(0, 0) - board.at(16, 16)) <= 1);
    CHECK(std::abs(out.at(31, 0) - board.at(47, 16)) <= 1);
    CHECK(std::abs(out.at(0, 31) - board.at(16, 47)) <= 1);
    CHECK(std::abs(out.at(31, 31) - board.at(47, 47)) <= 1);
}

TEST_CASE("apply_foreground_mask blacks out the background") {
    Raster rgb = testutil::patterned_rgb(5, 4);
    MaskLayer fg = mask_from_rows({"11100",
                                   "11100",
                                   "00011",
                                   "00011"},
                                  CodeTable::Binary);
    Raster masked = apply_foreground_mask(rgb, fg, Color{0, 0, 0});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            for (int c = 0; c < 3; ++c) {
                if (fg.at(x, y) == 1)
                    CHECK(masked.at(x, y, c) == rgb.at(x, y, c));
                else
                    CHECK(masked.at(x, y, c) == 0);
            }

    Raster tinted = apply_foreground_mask(rgb, fg, Color{9, 8, 7});
    CHECK(tinted.at(4, 0, 0) == 9);
    CHECK(tinted.at(4, 0, 1) == 8);
    CHECK(tinted.at(4, 0, 2) == 7);

    MaskLayer wrong = MaskLayer::make(4, 4, CodeTable::Binary);
    CHECK_THROWS_AS(apply_foreground_mask(rgb, wrong, Color{0, 0, 0}), Error);
}

} // TEST_SUITE
