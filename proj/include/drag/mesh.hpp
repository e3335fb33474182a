#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "drag/geometry.hpp"

namespace drag {

/// Indexed triangle soup. Normals are always recomputed from vertex
/// winding; normals found in files are ignored.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<Vec3> normals;  // per triangle, unit length

    bool empty() const { return triangles.empty(); }
    void recompute_normals();
};

/// What happened during parsing: how many degenerate facets were dropped
/// and how many file vertices were merged into existing ones.
struct ParseReport {
    std::size_t declared_triangles = 0;
    std::size_t dropped_degenerate = 0;
    std::size_t merged_vertices = 0;
    bool ascii = false;
};

BoundingBox bounding_box(const TriangleMesh& mesh);

}  // namespace drag
