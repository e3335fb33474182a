#pragma once

#include <string>
#include <vector>

#include "drag/point_cloud.hpp"

namespace drag {

/// One labeled training sample.
struct DragSample {
    PointCloud cloud;
    double cd = 0.0;
    std::string id;
};

/// Typical-Cd sanity window; out-of-range labels are flagged, not rejected.
bool cd_in_typical_range(double cd);

/// Dataset directory layout: cloud_<id>.csv per sample (raw mesh-frame
/// coordinates) plus a labels.csv manifest with `id,cd` rows. The same
/// layout is the ingestion contract for externally supplied data.
void save_dataset(const std::string& dir, const std::vector<DragSample>& samples);
std::vector<DragSample> load_dataset(const std::string& dir);

/// FPS-downsample every cloud to `points` (no-op when already smaller).
std::vector<DragSample> downsample_dataset(const std::vector<DragSample>& samples,
                                           std::size_t points);

}  // namespace drag
