#include <doctest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "drag/contour.hpp"
#include "drag/error.hpp"
#include "test_support.hpp"

using namespace drag;

namespace {

double polyline_perimeter(const Polyline2& line) {
    double sum = 0;
    const auto& p = line.points;
    const std::size_t m = p.size();
    const std::size_t edges = line.closed ? m : m - 1;
    for (std::size_t i = 0; i < edges; ++i) sum += (p[(i + 1) % m] - p[i]).norm();
    return sum;
}

double polygon_area(const std::vector<Vec2>& pts) {
    double a = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) a += pts[i].cross(pts[(i + 1) % pts.size()]);
    return 0.5 * a;
}

// Brute-force convex hull edge test: (i,j) is a hull edge iff all other
// points lie on one side. Returns edges as sorted index pairs.
std::vector<std::pair<std::size_t, std::size_t>> brute_hull_edges(const std::vector<Vec2>& pts) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            bool pos = false, neg = false;
            for (std::size_t m = 0; m < pts.size(); ++m) {
                if (m == i || m == j) continue;
                double c = (pts[j] - pts[i]).cross(pts[m] - pts[i]);
                if (c > 0) pos = true;
                if (c < 0) neg = true;
            }
            if (!(pos && neg)) edges.push_back({i, j});
        }
    return edges;
}

}  // namespace

TEST_CASE("unit cube sliced at x=0.5 yields one square loop of perimeter 4") {
    auto cube = testsup::unit_cube();
    auto section = slice_mesh(cube, {1, 0, 0}, 0.5);
    REQUIRE(section.loops.size() == 1);
    CHECK(section.open_chains.empty());
    CHECK(polyline_perimeter(section.loops[0]) == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("icosphere great-circle slice has perimeter close to 2*pi") {
    auto sphere = testsup::icosphere(3);
    auto section = slice_mesh(sphere, {1, 0, 0}, 0.0);
    REQUIRE(section.loops.size() == 1);
    double perimeter = polyline_perimeter(section.loops[0]);
    CHECK(std::abs(perimeter - 2.0 * std::numbers::pi) < 0.02 * 2.0 * std::numbers::pi);
}

TEST_CASE("plane outside the mesh raises NoIntersection") {
    auto cube = testsup::unit_cube();
    CHECK_THROWS_WITH_AS(slice_mesh(cube, {1, 0, 0}, 2.0), doctest::Contains("NoIntersection"),
                         Error);
}

TEST_CASE("sliced points lie on the slicing plane") {
    auto sphere = testsup::icosphere(2);
    auto section = slice_mesh(sphere, {1, 0, 0}, 0.3);
    for (const auto& loop : section.loops)
        for (const Vec2& p : loop.points) {
            Vec3 lifted = section.lift(p);
            CHECK(std::abs(lifted.dot(section.axis) - 0.3) <= 1e-6);
        }
}

TEST_CASE("alpha shape of square corners with a large alpha is the square") {
    std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    auto boundary = alpha_shape_2d(pts, 100.0);
    REQUIRE(boundary.size() == 1);
    REQUIRE(boundary[0].closed);
    REQUIRE(boundary[0].points.size() == 4);
    CHECK(polygon_area(boundary[0].points) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("alpha shape keeps the rim and drops the interior point") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 100; ++i) {
        double a = 2.0 * std::numbers::pi * i / 100;
        pts.push_back({std::cos(a), std::sin(a)});
    }
    pts.push_back({0.17, 0.05});  // interior

    auto boundary = alpha_shape_2d(pts, auto_alpha(pts));
    REQUIRE(boundary.size() == 1);
    REQUIRE(boundary[0].closed);
    CHECK(boundary[0].points.size() == 100);
    for (const Vec2& p : boundary[0].points) CHECK(p.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("collinear input raises DegenerateInput") {
    std::vector<Vec2> pts{{0, 0}, {1, 1}, {2, 2}};
    CHECK_THROWS_WITH_AS(alpha_shape_2d(pts, 1.0), doctest::Contains("DegenerateInput"), Error);
}

TEST_CASE("alpha shape with AUTO-max alpha equals the brute-force hull") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        // random points, then keep only hull vertices -> convex position
        std::vector<Vec2> raw(40);
        for (auto& p : raw) p = {u(rng), u(rng)};
        auto hull_edges = brute_hull_edges(raw);
        std::vector<std::size_t> hull_ids;
        for (auto [i, j] : hull_edges) {
            hull_ids.push_back(i);
            hull_ids.push_back(j);
        }
        std::sort(hull_ids.begin(), hull_ids.end());
        hull_ids.erase(std::unique(hull_ids.begin(), hull_ids.end()), hull_ids.end());
        std::vector<Vec2> convex;
        for (std::size_t id : hull_ids) convex.push_back(raw[id]);

        auto boundary = alpha_shape_2d(convex, 1e6);
        REQUIRE(boundary.size() == 1);
        CHECK(boundary[0].closed);
        CHECK(boundary[0].points.size() == convex.size());

        auto oracle = brute_hull_edges(convex);
        CHECK(oracle.size() == convex.size());
    }
}

TEST_CASE("circle contour resamples uniformly") {
    Polyline2 circle;
    circle.closed = true;
    for (int i = 0; i < 360; ++i) {
        double a = 2.0 * std::numbers::pi * i / 360;
        circle.points.push_back({std::cos(a), std::sin(a)});
    }
    SectionContour contour;
    contour.loops.push_back(circle);

    ExtractionConfig cfg;
    cfg.points_per_section = 100;
    auto samples = curvature_adaptive_resample(contour, cfg, 2.0 * std::sqrt(2.0));
    REQUIRE(samples.size() == 100);

    std::vector<double> gaps;
    for (std::size_t i = 0; i < samples.size(); ++i)
        gaps.push_back((samples[(i + 1) % samples.size()] - samples[i]).norm());
    auto [mn, mx] = std::minmax_element(gaps.begin(), gaps.end());
    CHECK(*mx / *mn <= 1.01);
}

TEST_CASE("stadium curve puts triple density on the semicircles") {
    // stadium: straights y=+-r for x in [0,2], semicircle caps of radius r
    const double r = 0.5;
    Polyline2 stadium;
    stadium.closed = true;
    const int arc_n = 200, straight_n = 200;
    for (int i = 0; i < straight_n; ++i)  // bottom straight, left to right
        stadium.points.push_back({2.0 * i / straight_n, -r});
    for (int i = 0; i < arc_n; ++i) {  // right cap, -pi/2 .. pi/2
        double a = -std::numbers::pi / 2 + std::numbers::pi * i / arc_n;
        stadium.points.push_back({2.0 + r * std::cos(a), r * std::sin(a)});
    }
    for (int i = 0; i < straight_n; ++i)  // top straight, right to left
        stadium.points.push_back({2.0 - 2.0 * i / straight_n, r});
    for (int i = 0; i < arc_n; ++i) {  // left cap
        double a = std::numbers::pi / 2 + std::numbers::pi * i / arc_n;
        stadium.points.push_back({r * std::cos(a), r * std::sin(a)});
    }

    SectionContour contour;
    contour.loops.push_back(stadium);

    ExtractionConfig cfg;
    cfg.points_per_section = 1000;
    cfg.densify_factor = 3.0;
    // diagonal chosen so the threshold radius falls between r=0.5 and infinity
    const double diagonal = std::sqrt(3.0 * 3.0 + 1.0);
    cfg.curvature_radius_threshold = 0.3;  // 0.3 * 3.16 = 0.95 > 0.5
    auto samples = curvature_adaptive_resample(contour, cfg, diagonal);
    REQUIRE(samples.size() == 1000);

    int on_arc = 0, on_straight = 0;
    for (const Vec2& p : samples) {
        if (p.x >= 0.02 && p.x <= 1.98)
            ++on_straight;
        else
            ++on_arc;
    }
    const double arc_len = std::numbers::pi * r * 2.0;
    const double straight_len = 2.0 * 1.96;
    double density_ratio = (on_arc / arc_len) / (on_straight / straight_len);
    CHECK(density_ratio == doctest::Approx(3.0).epsilon(0.10));
}

TEST_CASE("square contour resamples to the exact requested count") {
    Polyline2 square;
    square.closed = true;
    for (int i = 0; i < 40; ++i) square.points.push_back({i / 40.0, 0.0});
    for (int i = 0; i < 40; ++i) square.points.push_back({1.0, i / 40.0});
    for (int i = 0; i < 40; ++i) square.points.push_back({1.0 - i / 40.0, 1.0});
    for (int i = 0; i < 40; ++i) square.points.push_back({0.0, 1.0 - i / 40.0});
    SectionContour contour;
    contour.loops.push_back(square);
    ExtractionConfig cfg;
    cfg.points_per_section = 1000;
    auto samples = curvature_adaptive_resample(contour, cfg, std::sqrt(2.0));
    CHECK(samples.size() == 1000);
}

TEST_CASE("empty contour is rejected") {
    SectionContour contour;
    ExtractionConfig cfg;
    CHECK_THROWS_WITH_AS(curvature_adaptive_resample(contour, cfg, 1.0),
                         doctest::Contains("EmptyContour"), Error);
}

TEST_CASE("extract_point_cloud hits the target size and stays on the surface") {
    auto cube = testsup::unit_cube();
    ExtractionConfig cfg;
    cfg.slice_count = 10;
    cfg.points_per_section = 100;
    cfg.target_cloud_size = 500;

    PointCloud cloud = extract_point_cloud(cube, cfg);
    REQUIRE(cloud.size() == 500);

    // every raw point lies on the cube surface: one coordinate at 0/1
    for (const Vec3& p : cloud.raw_points()) {
        double surf = std::min({std::abs(p.x), std::abs(p.x - 1), std::abs(p.y),
                                std::abs(p.y - 1), std::abs(p.z), std::abs(p.z - 1)});
        CHECK(surf <= 1e-6);
    }
}

TEST_CASE("extracted clouds are normalized") {
    auto sphere = testsup::icosphere(2, 2.5);
    for (auto& v : sphere.vertices) v = v + Vec3{4.0, -1.0, 0.5};
    ExtractionConfig cfg;
    cfg.slice_count = 12;
    cfg.points_per_section = 120;
    cfg.target_cloud_size = 600;
    PointCloud cloud = extract_point_cloud(sphere, cfg);

    Vec3 centroid{};
    double max_norm = 0;
    for (const Vec3& p : cloud.points) centroid += p;
    centroid = centroid / static_cast<double>(cloud.size());
    for (const Vec3& p : cloud.points) max_norm = std::max(max_norm, p.norm());
    CHECK(centroid.norm() <= 1e-9);
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("extraction is deterministic") {
    auto sphere = testsup::icosphere(2);
    ExtractionConfig cfg;
    cfg.slice_count = 8;
    cfg.points_per_section = 80;
    cfg.target_cloud_size = 400;
    PointCloud a = extract_point_cloud(sphere, cfg);
    PointCloud b = extract_point_cloud(sphere, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
        CHECK(a.points[i].z == b.points[i].z);
    }
}

TEST_CASE("farthest-point sampling spreads better than random sampling") {
    auto sphere = testsup::icosphere(3);
    ExtractionConfig cfg;
    cfg.slice_count = 20;
    cfg.points_per_section = 200;
    cfg.target_cloud_size = 500;
    PointCloud fps = extract_point_cloud(sphere, cfg);

    auto min_pairwise = [](const std::vector<Vec3>& pts) {
        double best = HUGE_VAL;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j)
                best = std::min(best, (pts[i] - pts[j]).norm());
        return best;
    };
    double fps_min = min_pairwise(fps.points);

    // oracle: uniform-random downsampling of the same union, median of 10 seeds
    std::vector<double> random_mins;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        PointCloud rnd = uniform_surface_sample(sphere, 500, seed);
        random_mins.push_back(min_pairwise(rnd.points));
    }
    std::sort(random_mins.begin(), random_mins.end());
    double median = 0.5 * (random_mins[4] + random_mins[5]);
    CHECK(fps_min >= 0.5 * median);
}

TEST_CASE("farthest-point sampling keeps the seed and its antipode") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts(200);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};

    auto idx = farthest_point_indices(pts, 20);
    std::size_t seed = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (pts[i].x > pts[seed].x) seed = i;
    CHECK(idx[0] == seed);

    std::size_t far = 0;
    double best = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double d = (pts[i] - pts[seed]).norm2();
        if (d > best) {
            best = d;
            far = i;
        }
    }
    CHECK(std::find(idx.begin(), idx.end(), far) != idx.end());
}

TEST_CASE("uniform surface sampling is area weighted") {
    auto cube = testsup::unit_cube();
    PointCloud cloud = uniform_surface_sample(cube, 6000, 99);
    auto raw = cloud.raw_points();
    // count per face (each face has area 1/6 of the total)
    int counts[6] = {0, 0, 0, 0, 0, 0};
    for (const Vec3& p : raw) {
        if (std::abs(p.z) < 1e-9) ++counts[0];
        else if (std::abs(p.z - 1) < 1e-9) ++counts[1];
        else if (std::abs(p.y) < 1e-9) ++counts[2];
        else if (std::abs(p.y - 1) < 1e-9) ++counts[3];
        else if (std::abs(p.x) < 1e-9) ++counts[4];
        else ++counts[5];
    }
    // chi-square against the uniform expectation (5 dof, p ~ 0.001)
    double chi2 = 0;
    for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    CHECK(chi2 <= 20.5);
    for (int c : counts) CHECK(std::abs(c - 1000) <= 100);
}

TEST_CASE("single-point sample sits at the normalized origin") {
    auto cube = testsup::unit_cube();
    PointCloud cloud = uniform_surface_sample(cube, 1, 7);
    REQUIRE(cloud.size() == 1);
    CHECK(cloud.points[0].norm() == 0.0);
}

TEST_CASE("surface sampling is deterministic per seed") {
    auto sphere = testsup::icosphere(1);
    PointCloud a = uniform_surface_sample(sphere, 300, 42);
    PointCloud b = uniform_surface_sample(sphere, 300, 42);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.points[i].x == b.points[i].x);
        CHECK(a.points[i].y == b.points[i].y);
        CHECK(a.points[i].z == b.points[i].z);
    }
}
