#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drag/geometry.hpp"

namespace drag {

/// Point-cloud interchange: header `x,y,z` or `x,y,z,<scalar name>`,
/// one point per row, '.' decimal separator, LF line endings.
struct CsvCloud {
    std::vector<Vec3> points;
    std::vector<double> scalar;  // empty unless a 4th column is present
    std::string scalar_name;
};

void write_cloud_csv(const std::string& path, const std::vector<Vec3>& points,
                     const std::vector<double>* scalar = nullptr,
                     const std::string& scalar_name = "scalar");

CsvCloud read_cloud_csv(const std::string& path);

}  // namespace drag
