#include <catch2/catch.hpp>

#include "vidrel/geometry.hpp"
#include "vidrel/oracles.hpp"

using namespace vidrel;

namespace {

Tubelet make_tubelet(int first_frame, std::vector<BoundingBox> boxes, const std::string& id = "t") {
    Tubelet t;
    t.tubelet_id = id;
    t.category = "thing";
    for (size_t i = 0; i < boxes.size(); ++i) t.boxes.push_back({first_frame + static_cast<int>(i), boxes[i]});
    return t;
}

BoundingBox random_int_box(Rng& rng, int extent) {
    int x0 = rng.uniform_int(0, extent - 2);
    int y0 = rng.uniform_int(0, extent - 2);
    int x1 = rng.uniform_int(x0 + 1, extent);
    int y1 = rng.uniform_int(y0 + 1, extent);
    return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1),
            static_cast<double>(y1)};
}

}  // namespace

TEST_CASE("iou basic cases", "[geometry]") {
    BoundingBox a{0, 0, 10, 10};
    CHECK(iou(a, a) == Approx(1.0));
    CHECK(iou(a, BoundingBox{20, 20, 30, 30}) == 0.0);
    CHECK(iou(a, BoundingBox{5, 0, 15, 10}) == Approx(1.0 / 3.0));
}

TEST_CASE("iou agrees with the pixel-grid oracle", "[geometry]") {
    Rng rng(101);
    for (int i = 0; i < 1000; ++i) {
        BoundingBox a = random_int_box(rng, 60);
        BoundingBox b = random_int_box(rng, 60);
        double analytic = iou(a, b);
        double counted = oracle::pixel_grid_iou(a, b);
        CHECK(analytic == Approx(counted).margin(1e-12));
    }
}

TEST_CASE("iou symmetry and bounds", "[geometry]") {
    Rng rng(77);
    for (int i = 0; i < 500; ++i) {
        BoundingBox a = random_int_box(rng, 40);
        BoundingBox b = random_int_box(rng, 40);
        double ab = iou(a, b);
        CHECK(ab == iou(b, a));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("mean_iou over overlapped frames", "[geometry]") {
    BoundingBox unit{0, 0, 10, 10};
    Tubelet a = make_tubelet(0, {unit, unit});
    CHECK(mean_iou(a, a) == Approx(1.0));

    Tubelet late = make_tubelet(10, {unit, unit});
    CHECK(mean_iou(a, late) == 0.0);

    // per-frame IoUs {1/3, 1.0} -> 2/3
    Tubelet b = make_tubelet(0, {BoundingBox{5, 0, 15, 10}, unit});
    CHECK(mean_iou(a, b) == Approx((1.0 / 3.0 + 1.0) / 2.0));
}

TEST_CASE("volume_iou basics and oracle agreement", "[geometry]") {
    BoundingBox unit{0, 0, 1, 1};
    Tubelet a = make_tubelet(0, {unit, unit});
    CHECK(volume_iou(a, a) == Approx(1.0));
    CHECK(volume_iou(a, make_tubelet(5, {unit})) == 0.0);

    // identical unit boxes offset by one frame: one shared frame out of three
    Tubelet b = make_tubelet(1, {unit, unit});
    CHECK(volume_iou(a, b) == Approx(1.0 / 3.0));

    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        FrameBoxTrack ta, tb;
        int na = rng.uniform_int(1, 4), nb = rng.uniform_int(1, 4);
        int fa = rng.uniform_int(0, 3), fb = rng.uniform_int(0, 3);
        for (int f = 0; f < na; ++f) ta.push_back({fa + f, random_int_box(rng, 30)});
        for (int f = 0; f < nb; ++f) tb.push_back({fb + f, random_int_box(rng, 30)});
        CHECK(volume_iou(ta, tb) == Approx(oracle::pixel_grid_volume_iou(ta, tb)).margin(1e-12));
    }
}

TEST_CASE("volume_iou_shared restricts to overlapped duration", "[geometry]") {
    BoundingBox unit{0, 0, 1, 1};
    Tubelet a = make_tubelet(0, {unit, unit});
    Tubelet b = make_tubelet(1, {unit, unit});
    CHECK(volume_iou_shared(a, b) == Approx(1.0));  // identical on the shared frame
    CHECK(volume_iou_shared(a, make_tubelet(5, {unit})) == 0.0);
}

TEST_CASE("mean_iou equals volume_iou for same-frames equal-IoU tracks", "[geometry]") {
    BoundingBox x{0, 0, 10, 10};
    BoundingBox y{5, 0, 15, 10};
    Tubelet a = make_tubelet(0, {x, x});
    Tubelet b = make_tubelet(0, {y, y});
    CHECK(mean_iou(a, b) == Approx(volume_iou(a, b)));
}

TEST_CASE("rel_spatial hand-computed example", "[geometry]") {
    // i: center (10,20), w=30, h=40; j: center (0,0), w=10, h=20
    BoundingBox i{10 - 15, 20 - 20, 10 + 15, 20 + 20};
    BoundingBox j{-5, -10, 5, 10};
    auto f = rel_spatial(i, j);
    CHECK(f[0] == Approx(1.0));
    CHECK(f[1] == Approx(1.0));
    CHECK(f[2] == Approx(std::log(3.0)));
    CHECK(f[3] == Approx(std::log(2.0)));
    CHECK(f[4] == Approx(std::log(6.0)));
}

TEST_CASE("rel_spatial identity and antisymmetry", "[geometry]") {
    BoundingBox b{3, 4, 13, 24};
    auto f = rel_spatial(b, b);
    for (double v : f) CHECK(v == Approx(0.0).margin(1e-12));

    Rng rng(55);
    for (int t = 0; t < 200; ++t) {
        BoundingBox x = random_int_box(rng, 50);
        BoundingBox y = random_int_box(rng, 50);
        auto fw = rel_spatial(x, y);
        auto bw = rel_spatial(y, x);
        // components 3-5 are exactly antisymmetric; 5 = 3 + 4
        CHECK(fw[2] == Approx(-bw[2]).margin(1e-9));
        CHECK(fw[3] == Approx(-bw[3]).margin(1e-9));
        CHECK(fw[4] == Approx(-bw[4]).margin(1e-9));
        CHECK(fw[4] == Approx(fw[2] + fw[3]).margin(1e-9));
    }
}

TEST_CASE("pair_spatial start/end concatenation", "[geometry]") {
    BoundingBox unit{0, 0, 10, 10};
    Tubelet still = make_tubelet(0, {unit, unit, unit}, "s");
    auto zero = pair_spatial(still, still);
    CHECK(zero.size() == 10);
    for (double v : zero) CHECK(v == Approx(0.0).margin(1e-12));

    // object moves between the first and last frame
    Tubelet moving = make_tubelet(0, {unit, unit, BoundingBox{5, 0, 15, 10}}, "m");
    auto f = pair_spatial(still, moving);
    CHECK(f[0] == Approx(0.0).margin(1e-12));      // first frame aligned
    CHECK(f[5] == Approx(-0.5));                   // last frame offset
    CHECK(f.size() == 10);
}

TEST_CASE("pair_spatial with no shared frames throws", "[geometry]") {
    BoundingBox unit{0, 0, 10, 10};
    Tubelet a = make_tubelet(0, {unit}, "a");
    Tubelet b = make_tubelet(10, {unit}, "b");
    CHECK_THROWS_AS(pair_spatial(a, b), ValidationError);
}
