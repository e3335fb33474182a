#include "drag/point_cloud.hpp"

#include <algorithm>

#include "drag/error.hpp"

namespace drag {

PointCloud normalize_cloud(const std::vector<Vec3>& raw, PointCloud::Source source) {
    if (raw.empty()) fail("EmptyMesh", "cannot normalize an empty point set");
    PointCloud cloud;
    cloud.source = source;

    Vec3 centroid{};
    for (const Vec3& p : raw) centroid += p;
    centroid = centroid / static_cast<double>(raw.size());

    double max_norm = 0.0;
    for (const Vec3& p : raw) max_norm = std::max(max_norm, (p - centroid).norm());
    if (max_norm <= 0.0) max_norm = 1.0;

    cloud.centroid = centroid;
    cloud.scale = max_norm;
    cloud.points.reserve(raw.size());
    for (const Vec3& p : raw) cloud.points.push_back((p - centroid) / max_norm);
    return cloud;
}

std::vector<std::size_t> farthest_point_indices(const std::vector<Vec3>& points, std::size_t n) {
    const std::size_t total = points.size();
    if (n == 0 || total == 0) return {};
    n = std::min(n, total);

    std::size_t seed = 0;
    for (std::size_t i = 1; i < total; ++i)
        if (points[i].x > points[seed].x) seed = i;

    std::vector<std::size_t> selected;
    selected.reserve(n);
    selected.push_back(seed);

    // min squared distance from each point to the selected set
    std::vector<double> min_d2(total);
    for (std::size_t i = 0; i < total; ++i) min_d2[i] = (points[i] - points[seed]).norm2();

    while (selected.size() < n) {
        std::size_t best = 0;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < total; ++i) {
            if (min_d2[i] > best_d2) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        selected.push_back(best);
        const Vec3 p = points[best];
        for (std::size_t i = 0; i < total; ++i) {
            double d2 = (points[i] - p).norm2();
            if (d2 < min_d2[i]) min_d2[i] = d2;
        }
    }
    return selected;
}

PointCloud fps_downsample(const PointCloud& cloud, std::size_t n) {
    std::vector<Vec3> raw = cloud.raw_points();
    auto idx = farthest_point_indices(raw, n);
    std::vector<Vec3> subset;
    subset.reserve(idx.size());
    for (std::size_t i : idx) subset.push_back(raw[i]);
    return normalize_cloud(subset, cloud.source);
}

}  // namespace drag
