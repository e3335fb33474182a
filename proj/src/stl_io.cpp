#include "drag/stl_io.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "drag/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary STL import assumes a little-endian host");

namespace drag {
namespace {

constexpr double kVertexMergeTol = 1e-9;  // meters
constexpr std::size_t kBinaryHeaderSize = 84;
constexpr std::size_t kBinaryRecordSize = 50;

// Accumulates vertices, merging any within kVertexMergeTol of an existing
// one. Uses a hash grid keyed on quantized coordinates; the 27-cell probe
// covers points straddling a cell boundary.
class VertexMerger {
public:
    std::uint32_t add(const Vec3& p) {
        const std::int64_t cx = cell(p.x), cy = cell(p.y), cz = cell(p.z);
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    auto it = grid_.find(key(cx + dx, cy + dy, cz + dz));
                    if (it == grid_.end()) continue;
                    for (std::uint32_t idx : it->second) {
                        if ((vertices_[idx] - p).norm() <= kVertexMergeTol) {
                            ++merged_;
                            return idx;
                        }
                    }
                }
        auto idx = static_cast<std::uint32_t>(vertices_.size());
        vertices_.push_back(p);
        grid_[key(cx, cy, cz)].push_back(idx);
        return idx;
    }

    std::vector<Vec3> take() { return std::move(vertices_); }
    std::size_t merged_count() const { return merged_; }

private:
    static std::int64_t cell(double v) {
        return static_cast<std::int64_t>(std::floor(v / kVertexMergeTol));
    }
    static std::uint64_t key(std::int64_t x, std::int64_t y, std::int64_t z) {
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t v : {x, y, z}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ull;
        }
        return h;
    }

    std::vector<Vec3> vertices_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid_;
    std::size_t merged_ = 0;
};

struct RawTriangle {
    Vec3 v[3];
};

// Shared tail of both parsers: dedup vertices, drop degenerate facets.
TriangleMesh assemble(const std::vector<RawTriangle>& raw, ParseReport& report) {
    TriangleMesh mesh;
    VertexMerger merger;
    for (const RawTriangle& t : raw) {
        std::uint32_t a = merger.add(t.v[0]);
        std::uint32_t b = merger.add(t.v[1]);
        std::uint32_t c = merger.add(t.v[2]);
        if (a == b || b == c || a == c) {
            ++report.dropped_degenerate;
            continue;
        }
        mesh.triangles.push_back({a, b, c});
    }
    mesh.vertices = merger.take();
    report.merged_vertices = merger.merged_count();

    // Zero-area facets with three distinct vertices are also degenerate.
    std::vector<std::array<std::uint32_t, 3>> kept;
    kept.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                     .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        if (n.norm2() <= 0.0) {
            ++report.dropped_degenerate;
            continue;
        }
        kept.push_back(t);
    }
    mesh.triangles = std::move(kept);

    // Dropped facets may leave vertices behind; prune so the vertex set
    // reflects the surviving surface only.
    std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    std::vector<Vec3> pruned;
    for (auto& t : mesh.triangles)
        for (auto& idx : t) {
            if (remap[idx] == UINT32_MAX) {
                remap[idx] = static_cast<std::uint32_t>(pruned.size());
                pruned.push_back(mesh.vertices[idx]);
            }
            idx = remap[idx];
        }
    mesh.vertices = std::move(pruned);
    mesh.recompute_normals();
    return mesh;
}

float read_f32(const std::uint8_t* p) {
    float f;
    std::memcpy(&f, p, 4);
    return f;
}

std::uint32_t read_u32(const std::uint8_t* p) {
    std::uint32_t u;
    std::memcpy(&u, p, 4);
    return u;
}

TriangleMesh parse_binary(std::span<const std::uint8_t> bytes, ParseReport& report) {
    if (bytes.size() < kBinaryHeaderSize)
        fail("TruncatedFile", "binary STL needs at least 84 bytes, got " +
                                  std::to_string(bytes.size()));
    const std::uint64_t count = read_u32(bytes.data() + 80);
    const std::uint64_t expected = kBinaryHeaderSize + kBinaryRecordSize * count;
    if (bytes.size() != expected)
        fail("TruncatedFile", "declared " + std::to_string(count) + " triangles (" +
                                  std::to_string(expected) + " bytes) but file holds " +
                                  std::to_string(bytes.size()) + " bytes");

    report.declared_triangles = count;
    report.ascii = false;
    std::vector<RawTriangle> raw;
    raw.reserve(count);
    const std::uint8_t* p = bytes.data() + kBinaryHeaderSize;
    for (std::uint64_t i = 0; i < count; ++i, p += kBinaryRecordSize) {
        RawTriangle t;
        // skip the 12-byte file normal; it is recomputed
        for (int v = 0; v < 3; ++v) {
            const std::uint8_t* q = p + 12 + 12 * v;
            t.v[v] = {read_f32(q), read_f32(q + 4), read_f32(q + 8)};
        }
        raw.push_back(t);
    }
    return assemble(raw, report);
}

class AsciiTokenizer {
public:
    explicit AsciiTokenizer(std::span<const std::uint8_t> bytes)
        : text_(reinterpret_cast<const char*>(bytes.data()), bytes.size()) {}

    // Returns the next whitespace-delimited token, empty at end of input.
    std::string_view next() {
        while (pos_ < text_.size() && is_space(text_[pos_])) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        if (pos_ >= text_.size()) return {};
        std::size_t start = pos_;
        while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
        return text_.substr(start, pos_ - start);
    }

    std::size_t line() const { return line_; }

    // Consumes the rest of the current line (solid/endsolid names).
    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
    }

private:
    static bool is_space(char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n';
    }
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

[[noreturn]] void ascii_fail(const AsciiTokenizer& tok, const std::string& what) {
    fail("MalformedAscii", what + " (line " + std::to_string(tok.line()) + ")");
}

void expect_token(AsciiTokenizer& tok, std::string_view want) {
    std::string_view got = tok.next();
    if (got != want)
        ascii_fail(tok, "expected '" + std::string(want) + "', got '" + std::string(got) + "'");
}

double parse_number(AsciiTokenizer& tok) {
    std::string_view t = tok.next();
    if (t.empty()) ascii_fail(tok, "expected a number, got end of file");
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size())
        ascii_fail(tok, "bad numeric token '" + std::string(t) + "'");
    if (!std::isfinite(value)) ascii_fail(tok, "non-finite coordinate");
    return value;
}

TriangleMesh parse_ascii(std::span<const std::uint8_t> bytes, ParseReport& report) {
    AsciiTokenizer tok(bytes);
    expect_token(tok, "solid");
    tok.skip_line();

    std::vector<RawTriangle> raw;
    for (;;) {
        std::string_view t = tok.next();
        if (t == "endsolid") {
            tok.skip_line();
            break;
        }
        if (t != "facet")
            ascii_fail(tok, "expected 'facet' or 'endsolid', got '" + std::string(t) + "'");
        expect_token(tok, "normal");
        parse_number(tok);
        parse_number(tok);
        parse_number(tok);
        expect_token(tok, "outer");
        expect_token(tok, "loop");
        RawTriangle tri;
        for (int v = 0; v < 3; ++v) {
            expect_token(tok, "vertex");
            tri.v[v].x = parse_number(tok);
            tri.v[v].y = parse_number(tok);
            tri.v[v].z = parse_number(tok);
        }
        expect_token(tok, "endloop");
        expect_token(tok, "endfacet");
        raw.push_back(tri);
    }

    report.declared_triangles = raw.size();
    report.ascii = true;
    return assemble(raw, report);
}

bool starts_with_solid(std::span<const std::uint8_t> bytes) {
    std::size_t i = 0;
    while (i < bytes.size() && (bytes[i] == ' ' || bytes[i] == '\t')) ++i;
    static constexpr char kw[] = "solid";
    for (std::size_t j = 0; j < 5; ++j)
        if (i + j >= bytes.size() || bytes[i + j] != static_cast<std::uint8_t>(kw[j]))
            return false;
    return true;
}

bool binary_length_consistent(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kBinaryHeaderSize) return false;
    const std::uint64_t count = read_u32(bytes.data() + 80);
    return bytes.size() == kBinaryHeaderSize + kBinaryRecordSize * count;
}

void append_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint8_t buf[4];
    std::memcpy(buf, &f, 4);
    out.insert(out.end(), buf, buf + 4);
}

}  // namespace

TriangleMesh parse_stl(std::span<const std::uint8_t> bytes, ParseReport* report) {
    ParseReport local;
    ParseReport& rep = report ? *report : local;
    rep = ParseReport{};

    if (starts_with_solid(bytes)) {
        // "solid" header is necessary but not sufficient for ASCII: some
        // binary exporters write it too. Try ASCII first, fall back to
        // binary when the byte length fits the binary layout.
        try {
            return parse_ascii(bytes, rep);
        } catch (const Error&) {
            if (!binary_length_consistent(bytes)) throw;
            rep = ParseReport{};
        }
        return parse_binary(bytes, rep);
    }
    return parse_binary(bytes, rep);
}

std::vector<std::uint8_t> write_stl(const TriangleMesh& mesh, StlFormat format) {
    std::vector<std::uint8_t> out;
    if (format == StlFormat::binary) {
        out.reserve(kBinaryHeaderSize + kBinaryRecordSize * mesh.triangles.size());
        char header[80] = "aerodrag binary stl";
        out.insert(out.end(), header, header + 80);
        auto count = static_cast<std::uint32_t>(mesh.triangles.size());
        std::uint8_t cbuf[4];
        std::memcpy(cbuf, &count, 4);
        out.insert(out.end(), cbuf, cbuf + 4);
        for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
            const auto& t = mesh.triangles[i];
            const Vec3& n = mesh.normals[i];
            append_f32(out, static_cast<float>(n.x));
            append_f32(out, static_cast<float>(n.y));
            append_f32(out, static_cast<float>(n.z));
            for (int v = 0; v < 3; ++v) {
                const Vec3& p = mesh.vertices[t[v]];
                append_f32(out, static_cast<float>(p.x));
                append_f32(out, static_cast<float>(p.y));
                append_f32(out, static_cast<float>(p.z));
            }
            out.push_back(0);
            out.push_back(0);
        }
        return out;
    }

    std::string text = "solid aerodrag\n";
    char line[256];
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        const Vec3& n = mesh.normals[i];
        std::snprintf(line, sizeof line, "  facet normal %.9g %.9g %.9g\n", n.x, n.y, n.z);
        text += line;
        text += "    outer loop\n";
        for (int v = 0; v < 3; ++v) {
            const Vec3& p = mesh.vertices[t[v]];
            std::snprintf(line, sizeof line, "      vertex %.17g %.17g %.17g\n", p.x, p.y, p.z);
            text += line;
        }
        text += "    endloop\n  endfacet\n";
    }
    text += "endsolid aerodrag\n";
    return {text.begin(), text.end()};
}

TriangleMesh read_stl_file(const std::string& path, ParseReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("TruncatedFile", "cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_stl(bytes, report);
}

void write_stl_file(const TriangleMesh& mesh, const std::string& path, StlFormat format) {
    auto bytes = write_stl(mesh, format);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("TruncatedFile", "cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace drag
