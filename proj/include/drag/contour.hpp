#pragma once

#include <cstdint>
#include <vector>

#include "drag/mesh.hpp"
#include "drag/point_cloud.hpp"

namespace drag {

struct Polyline2 {
    std::vector<Vec2> points;  // consecutive points distinct; closure implicit
    bool closed = true;
};

/// Cross-section of a mesh with a slicing plane, expressed in the
/// in-plane (u,v) basis. Chains that fail to close within 1e-4 m are
/// kept separately as open polylines.
struct SectionContour {
    double position = 0.0;
    Vec3 axis{1, 0, 0};
    Vec3 basis_u{0, 1, 0};
    Vec3 basis_v{0, 0, 1};
    std::vector<Polyline2> loops;
    std::vector<Polyline2> open_chains;

    Vec3 lift(const Vec2& p) const {
        return axis * position + basis_u * p.x + basis_v * p.y;
    }
};

struct ExtractionConfig {
    int slice_count = 40;
    int points_per_section = 1000;
    int target_cloud_size = 5000;
    double alpha = 0.0;  // <= 0 selects AUTO (2x median nearest-neighbor spacing)
    double curvature_radius_threshold = 0.02;  // fraction of bbox diagonal
    double densify_factor = 3.0;
    Vec3 axis{1, 0, 0};

    void validate() const;
};

/// Intersect the mesh with the plane dot(p, axis) == position and stitch
/// the resulting segments into contours. Segment endpoints are matched
/// within 1e-7 m; chains whose ends meet within 1e-4 m count as closed.
SectionContour slice_mesh(const TriangleMesh& mesh, const Vec3& axis, double position);

/// Boundary of the 2-D alpha shape: an edge is on the boundary iff some
/// open disk of radius alpha with both endpoints on its rim is empty of
/// other points. Edges are chained into ordered polylines; closed loops
/// are oriented counterclockwise. Large alpha reproduces the convex hull.
std::vector<Polyline2> alpha_shape_2d(const std::vector<Vec2>& points, double alpha);

/// AUTO alpha heuristic: twice the median nearest-neighbor spacing.
double auto_alpha(const std::vector<Vec2>& points);

/// Signed curvature per vertex from the circumscribed circle of three
/// consecutive points. Open polylines copy the curvature of the nearest
/// interior vertex to their endpoints.
std::vector<double> polyline_curvature(const Polyline2& line);

/// Arc-length resampling with densify_factor-times higher sample density
/// where the osculating radius drops below curvature_radius_threshold x
/// bbox_diagonal. Returns exactly points_per_section points, allocated
/// across polylines proportionally to weighted length.
std::vector<Vec2> curvature_adaptive_resample(const SectionContour& contour,
                                              const ExtractionConfig& config,
                                              double bbox_diagonal);

/// Full sectional pipeline: slice at slice_count stations spanning
/// [min+eps, max-eps] along the axis, recover each section's outer
/// boundary with the alpha shape, resample by curvature, lift to 3-D,
/// farthest-point downsample to target_cloud_size, then normalize.
PointCloud extract_point_cloud(const TriangleMesh& mesh, const ExtractionConfig& config);

/// Area-weighted random surface sampling (fallback input path).
PointCloud uniform_surface_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

}  // namespace drag
