#include <doctest.h>

#include <cstring>
#include <random>
#include <sstream>

#include "drag/error.hpp"
#include "drag/stl_io.hpp"
#include "test_support.hpp"

using namespace drag;

namespace {

std::vector<std::uint8_t> minimal_binary_stl(std::uint32_t declared, std::uint32_t actual) {
    std::vector<std::uint8_t> bytes(84 + 50 * actual, 0);
    std::memcpy(bytes.data() + 80, &declared, 4);
    for (std::uint32_t t = 0; t < actual; ++t) {
        float coords[12] = {0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0};
        // distinct vertices per triangle so nothing degenerates
        coords[3] = static_cast<float>(t);
        coords[7] = static_cast<float>(t + 1);
        coords[11] = static_cast<float>(t + 2);
        std::memcpy(bytes.data() + 84 + 50 * t, coords, 48);
    }
    return bytes;
}

std::string ascii_cube_text() {
    auto cube = testsup::unit_cube();
    auto bytes = write_stl(cube, StlFormat::ascii);
    return {bytes.begin(), bytes.end()};
}

}  // namespace

TEST_CASE("binary STL with one triangle parses to 3 vertices") {
    auto bytes = minimal_binary_stl(1, 1);
    ParseReport report;
    auto mesh = parse_stl(bytes, &report);
    CHECK(mesh.vertices.size() == 3);
    CHECK(mesh.triangles.size() == 1);
    CHECK(report.declared_triangles == 1);
    CHECK_FALSE(report.ascii);
}

TEST_CASE("ASCII unit cube dedups to 8 vertices, 12 triangles") {
    std::string text = ascii_cube_text();
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    ParseReport report;
    auto mesh = parse_stl(bytes, &report);
    CHECK(report.ascii);
    CHECK(mesh.vertices.size() == 8);
    CHECK(mesh.triangles.size() == 12);
    // ASCII merges the per-facet duplicates: 36 file vertices -> 8
    CHECK(report.merged_vertices == 28);
}

TEST_CASE("declared count mismatch raises TruncatedFile") {
    auto bytes = minimal_binary_stl(10, 9);
    CHECK_THROWS_WITH_AS(parse_stl(bytes), doctest::Contains("TruncatedFile"), Error);
}

TEST_CASE("recomputed normals are unit length") {
    auto mesh = testsup::icosphere(1);
    for (const auto& n : mesh.normals) CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("binary round trip is exact") {
    auto cube = testsup::unit_cube();
    auto bytes = write_stl(cube, StlFormat::binary);
    auto back = parse_stl(bytes);
    REQUIRE(back.vertices.size() == 8);
    REQUIRE(back.triangles.size() == 12);
    // vertex order may change with facet order, but the first facet pins it here
    for (std::size_t i = 0; i < back.vertices.size(); ++i) {
        bool found = false;
        for (const auto& v : cube.vertices)
            if (v.x == back.vertices[i].x && v.y == back.vertices[i].y &&
                v.z == back.vertices[i].z)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("empty mesh writes a valid 84-byte binary file") {
    TriangleMesh empty;
    auto bytes = write_stl(empty, StlFormat::binary);
    CHECK(bytes.size() == 84);
    auto back = parse_stl(bytes);
    CHECK(back.vertices.empty());
    CHECK(back.triangles.empty());
}

TEST_CASE("ASCII round trip stays within 1e-6") {
    drag::TriangleMesh tri;
    tri.vertices = {{0.1234567, 0.7654321, 1.0 / 3.0}, {1, 0, 0}, {0, 1, 0.25}};
    tri.triangles = {{0, 1, 2}};
    tri.recompute_normals();
    auto bytes = write_stl(tri, StlFormat::ascii);
    auto back = parse_stl(bytes);
    REQUIRE(back.vertices.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.vertices[i].x == doctest::Approx(tri.vertices[i].x).epsilon(1e-6));
        CHECK(back.vertices[i].y == doctest::Approx(tri.vertices[i].y).epsilon(1e-6));
        CHECK(back.vertices[i].z == doctest::Approx(tri.vertices[i].z).epsilon(1e-6));
    }
}

TEST_CASE("malformed ASCII reports a line number") {
    std::string text = "solid junk\nfacet normal 0 0 1\nouter loop\nvertex 0 0 zero\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    try {
        parse_stl(bytes);
        FAIL("expected MalformedAscii");
    } catch (const Error& e) {
        CHECK(e.kind() == "MalformedAscii");
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("degenerate triangles are dropped and counted") {
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.triangles = {{0, 1, 2}};
    m.recompute_normals();
    auto bytes = write_stl(m, StlFormat::binary);
    // append a zero-area facet (all three vertices identical)
    std::vector<std::uint8_t> extra(50, 0);
    bytes.insert(bytes.end(), extra.begin(), extra.end());
    std::uint32_t two = 2;
    std::memcpy(bytes.data() + 80, &two, 4);

    ParseReport report;
    auto back = parse_stl(bytes, &report);
    CHECK(back.triangles.size() == 1);
    CHECK(report.dropped_degenerate == 1);
    CHECK(report.dropped_degenerate + back.triangles.size() == report.declared_triangles);
}

TEST_CASE("bounding box basics") {
    auto cube = testsup::unit_cube();
    auto box = bounding_box(cube);
    CHECK(box.min.x == 0.0);
    CHECK(box.max.z == 1.0);

    for (auto& v : cube.vertices) v = v * 2.5;
    auto scaled = bounding_box(cube);
    CHECK(scaled.extent().x == doctest::Approx(2.5));

    TriangleMesh point;
    point.vertices = {{2, 3, 4}, {2, 3, 4}, {2, 3, 4}};
    point.triangles = {};
    auto degenerate = bounding_box(point);
    CHECK(degenerate.min.x == degenerate.max.x);

    TriangleMesh empty;
    CHECK_THROWS_AS(bounding_box(empty), Error);
}

TEST_CASE("parser survives random bytes") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> len(0, 400);
    std::uniform_int_distribution<int> byte(0, 255);
    int parsed = 0, rejected = 0;
    for (int i = 0; i < 500; ++i) {
        std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len(rng)));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(byte(rng));
        try {
            parse_stl(bytes);
            ++parsed;
        } catch (const Error&) {
            ++rejected;
        }
    }
    CHECK(parsed + rejected == 500);
}

TEST_CASE("binary round trip across random soups preserves coordinates") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto mesh = testsup::random_soup(rng, 15);
        auto back = parse_stl(write_stl(mesh, StlFormat::binary));
        REQUIRE(back.triangles.size() == mesh.triangles.size());
        for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
            for (int v = 0; v < 3; ++v) {
                const Vec3& a = mesh.vertices[mesh.triangles[t][static_cast<std::size_t>(v)]];
                const Vec3& b = back.vertices[back.triangles[t][static_cast<std::size_t>(v)]];
                CHECK(a.x == b.x);
                CHECK(a.y == b.y);
                CHECK(a.z == b.z);
            }
    }
}
