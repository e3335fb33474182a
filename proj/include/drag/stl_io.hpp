#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drag/mesh.hpp"

namespace drag {

enum class StlFormat { binary, ascii };

/// Parse binary or ASCII STL. Format is auto-detected: input starting
/// with "solid" is tried as ASCII first, with a fallback to binary when
/// the byte length matches the binary layout. Degenerate facets are
/// dropped and duplicate vertices (within 1e-9 m) merged; both are
/// counted in the report.
///
/// Throws Error("TruncatedFile") or Error("MalformedAscii").
TriangleMesh parse_stl(std::span<const std::uint8_t> bytes, ParseReport* report = nullptr);

std::vector<std::uint8_t> write_stl(const TriangleMesh& mesh, StlFormat format);

TriangleMesh read_stl_file(const std::string& path, ParseReport* report = nullptr);
void write_stl_file(const TriangleMesh& mesh, const std::string& path,
                    StlFormat format = StlFormat::binary);

}  // namespace drag
