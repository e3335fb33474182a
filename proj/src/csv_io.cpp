#include "drag/csv_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drag/error.hpp"

namespace drag {
namespace {

double parse_field(const std::string& field, const std::string& path, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        fail("MalformedCsv",
             "'" + path + "' line " + std::to_string(line) + ": bad number '" + field + "'");
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

void write_cloud_csv(const std::string& path, const std::vector<Vec3>& points,
                     const std::vector<double>* scalar, const std::string& scalar_name) {
    if (scalar && scalar->size() != points.size())
        fail("ShapeMismatch", "scalar column length " + std::to_string(scalar->size()) +
                                  " != point count " + std::to_string(points.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open '" + path + "' for writing");
    out << "x,y,z";
    if (scalar) out << "," << scalar_name;
    out << "\n";
    char buf[160];
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        if (scalar)
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", p.x, p.y, p.z,
                          (*scalar)[i]);
        else
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x, p.y, p.z);
        out << buf;
    }
}

CsvCloud read_cloud_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path + "'");

    CsvCloud cloud;
    std::string line;
    if (!std::getline(in, line))
        fail("MalformedCsv", "'" + path + "': missing header");
    auto header = split_fields(line);
    const bool has_scalar = header.size() == 4;
    if (header.size() < 3 || header.size() > 4 || header[0] != "x" || header[1] != "y" ||
        header[2] != "z")
        fail("MalformedCsv", "'" + path + "': expected header x,y,z[,scalar]");
    if (has_scalar) cloud.scalar_name = header[3];

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            fail("MalformedCsv", "'" + path + "' line " + std::to_string(lineno) +
                                     ": expected " + std::to_string(header.size()) + " fields");
        cloud.points.push_back({parse_field(fields[0], path, lineno),
                                parse_field(fields[1], path, lineno),
                                parse_field(fields[2], path, lineno)});
        if (has_scalar) cloud.scalar.push_back(parse_field(fields[3], path, lineno));
    }
    return cloud;
}

}  // namespace drag
