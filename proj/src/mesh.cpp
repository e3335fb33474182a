#include "drag/mesh.hpp"

#include "drag/error.hpp"

namespace drag {

void TriangleMesh::recompute_normals() {
    normals.resize(triangles.size());
    for (std::size_t i = 0; i < triangles.size(); ++i) {
        const auto& t = triangles[i];
        Vec3 a = vertices[t[0]];
        Vec3 b = vertices[t[1]];
        Vec3 c = vertices[t[2]];
        normals[i] = (b - a).cross(c - a).normalized();
    }
}

BoundingBox bounding_box(const TriangleMesh& mesh) {
    if (mesh.vertices.empty())
        fail("EmptyMesh", "bounding_box requires a non-empty mesh");
    BoundingBox box{mesh.vertices[0], mesh.vertices[0]};
    for (const Vec3& v : mesh.vertices) box.expand(v);
    return box;
}

}  // namespace drag
