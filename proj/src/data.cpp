#include "drag/data.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "drag/csv_io.hpp"
#include "drag/error.hpp"

namespace drag {

namespace fs = std::filesystem;

bool cd_in_typical_range(double cd) { return cd >= 0.05 && cd <= 1.5; }

void save_dataset(const std::string& dir, const std::vector<DragSample>& samples) {
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "labels.csv");
    if (!manifest) fail("IoError", "cannot write manifest in '" + dir + "'");
    manifest << "id,cd\n";
    char buf[64];
    for (const DragSample& s : samples) {
        std::snprintf(buf, sizeof buf, "%.17g", s.cd);
        manifest << s.id << "," << buf << "\n";
        write_cloud_csv((fs::path(dir) / ("cloud_" + s.id + ".csv")).string(), s.cloud.raw_points());
    }
}

std::vector<DragSample> load_dataset(const std::string& dir) {
    std::ifstream manifest(fs::path(dir) / "labels.csv");
    if (!manifest) fail("IoError", "missing labels.csv in '" + dir + "'");

    std::vector<DragSample> samples;
    std::string line;
    if (!std::getline(manifest, line) || line.substr(0, 5) != "id,cd")
        fail("MalformedCsv", "labels.csv must start with an 'id,cd' header");
    std::size_t lineno = 1;
    while (std::getline(manifest, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            fail("MalformedCsv", "labels.csv line " + std::to_string(lineno) + ": missing comma");
        DragSample s;
        s.id = line.substr(0, comma);
        std::string cd_str = line.substr(comma + 1);
        if (!cd_str.empty() && cd_str.back() == '\r') cd_str.pop_back();
        auto [p, ec] = std::from_chars(cd_str.data(), cd_str.data() + cd_str.size(), s.cd);
        if (ec != std::errc{} || p != cd_str.data() + cd_str.size())
            fail("MalformedCsv", "labels.csv line " + std::to_string(lineno) + ": bad cd value");
        if (!std::isfinite(s.cd))
            fail("MalformedCsv", "labels.csv line " + std::to_string(lineno) + ": non-finite cd");
        if (!cd_in_typical_range(s.cd))
            std::cerr << "warning: sample " << s.id << " has cd " << s.cd
                      << " outside the typical 0.05-1.5 range\n";

        auto csv = read_cloud_csv((fs::path(dir) / ("cloud_" + s.id + ".csv")).string());
        s.cloud = normalize_cloud(csv.points, PointCloud::Source::sectional);
        samples.push_back(std::move(s));
    }
    if (samples.empty()) fail("EmptyDataset", "'" + dir + "' holds no samples");
    return samples;
}

std::vector<DragSample> downsample_dataset(const std::vector<DragSample>& samples,
                                           std::size_t points) {
    std::vector<DragSample> out;
    out.reserve(samples.size());
    for (const DragSample& s : samples) {
        DragSample d;
        d.id = s.id;
        d.cd = s.cd;
        d.cloud = s.cloud.size() > points ? fps_downsample(s.cloud, points) : s.cloud;
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace drag
