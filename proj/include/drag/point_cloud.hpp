#pragma once

#include <vector>

#include "drag/geometry.hpp"

namespace drag {

/// Fixed-size point set in the normalized frame the network consumes:
/// centroid at the origin, max point norm 1. The (centroid, scale) pair
/// maps back to the source mesh frame.
struct PointCloud {
    enum class Source { sectional, uniform_surface };

    std::vector<Vec3> points;
    Source source = Source::sectional;
    Vec3 centroid{};
    double scale = 1.0;

    std::size_t size() const { return points.size(); }

    Vec3 to_raw(const Vec3& p) const { return p * scale + centroid; }
    std::vector<Vec3> raw_points() const {
        std::vector<Vec3> out;
        out.reserve(points.size());
        for (const Vec3& p : points) out.push_back(to_raw(p));
        return out;
    }
};

/// Subtract the centroid and divide by the max norm, recording both.
/// A degenerate cloud (all points coincident) keeps scale 1.
PointCloud normalize_cloud(const std::vector<Vec3>& raw, PointCloud::Source source);

/// Greedy farthest-point downsampling to n points. The seed is the point
/// of maximum x (lowest index on ties); each step adds the point with the
/// largest distance to the selected set, ties to the lowest index.
std::vector<std::size_t> farthest_point_indices(const std::vector<Vec3>& points, std::size_t n);

/// FPS-downsample and renormalize from raw coordinates.
PointCloud fps_downsample(const PointCloud& cloud, std::size_t n);

}  // namespace drag
