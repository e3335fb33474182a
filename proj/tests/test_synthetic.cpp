#include <doctest.h>

#include <cmath>
#include <map>

#include "drag/error.hpp"
#include "drag/synthetic.hpp"
#include "test_support.hpp"

using namespace drag;

namespace {

ExtractionConfig small_extraction() {
    ExtractionConfig cfg;
    cfg.slice_count = 10;
    cfg.points_per_section = 60;
    cfg.target_cloud_size = 200;
    return cfg;
}

bool watertight(const TriangleMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_count;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            std::uint32_t a = t[static_cast<std::size_t>(e)];
            std::uint32_t b = t[static_cast<std::size_t>((e + 1) % 3)];
            edge_count[{std::min(a, b), std::max(a, b)}] += 1;
        }
    for (const auto& [edge, count] : edge_count)
        if (count != 2) return false;
    return true;
}

}  // namespace

TEST_CASE("generated bodies are watertight") {
    ShapeParams p;
    CHECK(watertight(generate_body(p)));
    p.taper = 1.0;
    p.bluntness = 10.0;
    CHECK(watertight(generate_body(p)));
}

TEST_CASE("extreme bluntness approaches the bounding box") {
    ShapeParams p;
    p.length = 4.4;
    p.width = 1.7;
    p.height = 1.3;
    p.bluntness = 50.0;  // validity range allows sharper exponents than sampling
    p.taper = 0.0;
    p.cabin_ratio = 0.0;
    p.windshield_deg = 40.0;
    TriangleMesh mesh = generate_body(p);
    double bbox_volume = p.length * p.width * p.height;
    CHECK(testsup::mesh_volume(mesh) / bbox_volume >= 0.95);
}

TEST_CASE("taper only changes the body aft of mid-length") {
    ShapeParams a, b;
    a.taper = 0.0;
    b.taper = 1.0;
    TriangleMesh ma = generate_body(a);
    TriangleMesh mb = generate_body(b);
    REQUIRE(ma.vertices.size() == mb.vertices.size());
    for (std::size_t i = 0; i < ma.vertices.size(); ++i) {
        if (ma.vertices[i].x < 0.5 * a.length) {
            CHECK(std::abs(ma.vertices[i].x - mb.vertices[i].x) <= 1e-9);
            CHECK(std::abs(ma.vertices[i].y - mb.vertices[i].y) <= 1e-9);
            CHECK(std::abs(ma.vertices[i].z - mb.vertices[i].z) <= 1e-9);
        }
    }
}

TEST_CASE("body generation is bitwise deterministic") {
    ShapeParams p;
    p.bluntness = 7.3;
    TriangleMesh a = generate_body(p);
    TriangleMesh b = generate_body(p);
    REQUIRE(a.vertices.size() == b.vertices.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i) {
        CHECK(a.vertices[i].x == b.vertices[i].x);
        CHECK(a.vertices[i].y == b.vertices[i].y);
        CHECK(a.vertices[i].z == b.vertices[i].z);
    }
}

TEST_CASE("invalid parameters are rejected") {
    ShapeParams p;
    p.taper = 1.5;
    CHECK_THROWS_WITH_AS(generate_body(p), doctest::Contains("InvalidParams"), Error);
    CHECK_THROWS_AS(pseudo_drag(p), Error);
}

TEST_CASE("pseudo drag at the minimum-drag corner reduces to the area term") {
    const ParamBox& box = ParamBox::sampling();
    ShapeParams p;
    p.length = box.length.lo;
    p.width = box.width.lo;
    p.height = box.height.lo;
    p.bluntness = box.bluntness.lo;
    p.taper = 1.0;
    p.cabin_ratio = box.cabin_ratio.lo;
    p.windshield_deg = box.windshield_deg.lo;

    const double area = p.width * p.height * superellipse_area_ratio(p.bluntness);
    CHECK(pseudo_drag(p) == doctest::Approx(0.12 + 0.05 * area / 2.5).epsilon(1e-15));
    // bluntness 2 is an ellipse: area ratio is pi/4
    CHECK(superellipse_area_ratio(2.0) == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-12));
}

TEST_CASE("taper enters the label linearly") {
    ShapeParams a, b;
    a.taper = 0.2;
    b.taper = 0.75;
    CHECK(pseudo_drag(a) - pseudo_drag(b) ==
          doctest::Approx(0.30 * (b.taper - a.taper)).epsilon(1e-12));
}

TEST_CASE("sampled labels stay inside the derived interval") {
    auto params = sample_params(1000, 2024);
    double sum = 0, sq = 0;
    for (const auto& p : params) {
        double cd = pseudo_drag(p);
        CHECK(cd > 0.12);
        CHECK(cd < 0.82);
        sum += cd;
        sq += cd * cd;
    }
    double mean = sum / 1000;
    double std_dev = std::sqrt(sq / 1000 - mean * mean);
    CHECK(std_dev >= 0.05);  // labels are non-degenerate
}

TEST_CASE("cd_from_force matches hand arithmetic") {
    CHECK(cd_from_force(500, 1.225, 30, 2.2) == doctest::Approx(0.41228).epsilon(1e-4));
    CHECK(cd_from_force(0, 1.225, 30, 2.2) == 0.0);
    // doubling the velocity quarters the coefficient
    double base = cd_from_force(500, 1.225, 30, 2.2);
    CHECK(cd_from_force(500, 1.225, 60, 2.2) == doctest::Approx(base / 4.0).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(cd_from_force(1, 0, 30, 2.2),
                         doctest::Contains("NonPositiveDenominator"), Error);
}

TEST_CASE("make_dataset enforces the minimum size") {
    CHECK_THROWS_AS(make_dataset(9, 1, small_extraction()), Error);
}

TEST_CASE("make_dataset is deterministic and thread-count independent") {
    auto a = make_dataset(10, 7, small_extraction(), 1);
    auto b = make_dataset(10, 7, small_extraction(), 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        CHECK(a[s].id == b[s].id);
        CHECK(a[s].cd == b[s].cd);
        REQUIRE(a[s].cloud.size() == b[s].cloud.size());
        for (std::size_t i = 0; i < a[s].cloud.size(); ++i) {
            CHECK(a[s].cloud.points[i].x == b[s].cloud.points[i].x);
            CHECK(a[s].cloud.points[i].y == b[s].cloud.points[i].y);
            CHECK(a[s].cloud.points[i].z == b[s].cloud.points[i].z);
        }
    }
}

TEST_CASE("dataset directory round trip") {
    auto samples = make_dataset(10, 3, small_extraction());
    save_dataset("/tmp/aerodrag_ds_test", samples);
    auto back = load_dataset("/tmp/aerodrag_ds_test");
    REQUIRE(back.size() == samples.size());
    for (std::size_t s = 0; s < back.size(); ++s) {
        CHECK(back[s].id == samples[s].id);
        CHECK(back[s].cd == doctest::Approx(samples[s].cd).epsilon(1e-15));
        REQUIRE(back[s].cloud.size() == samples[s].cloud.size());
        // normalization recomputed on load must agree
        for (std::size_t i = 0; i < 5; ++i)
            CHECK(back[s].cloud.points[i].x ==
                  doctest::Approx(samples[s].cloud.points[i].x).epsilon(1e-12));
    }
}
