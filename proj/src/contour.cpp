#include "drag/contour.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_map>

#include "drag/error.hpp"

namespace drag {
namespace {

constexpr double kStitchTol = 1e-7;   // endpoint matching
constexpr double kCloseTol = 1e-4;    // open-chain closure
constexpr double kOnPlaneTol = 1e-12; // vertex-on-plane classification
constexpr double kDistinctTol = 1e-9; // consecutive-point separation

struct Segment {
    Vec2 a, b;
};

// In-plane basis: for the +X axis this is (Y, Z), matching the
// "sections live in the yz-plane" convention.
void plane_basis(const Vec3& axis, Vec3& u, Vec3& v) {
    Vec3 up = std::abs(axis.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
    u = up.cross(axis).normalized();
    v = axis.cross(u);
}

// Endpoint hash grid for segment stitching.
class EndpointIndex {
public:
    explicit EndpointIndex(double tol) : tol_(tol) {}

    void insert(const Vec2& p, std::int64_t id) {
        grid_[key(cell(p.x), cell(p.y))].push_back({p, id});
    }

    // Collects ids of endpoints within tol, lowest id first.
    std::vector<std::int64_t> query(const Vec2& p) const {
        std::vector<std::int64_t> out;
        const std::int64_t cx = cell(p.x), cy = cell(p.y);
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = grid_.find(key(cx + dx, cy + dy));
                if (it == grid_.end()) continue;
                for (const auto& [q, id] : it->second)
                    if ((q - p).norm() <= tol_) out.push_back(id);
            }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / tol_)); }
    static std::uint64_t key(std::int64_t x, std::int64_t y) {
        return static_cast<std::uint64_t>(x) * 0x9E3779B97F4A7C15ull ^
               static_cast<std::uint64_t>(y);
    }

    double tol_;
    std::unordered_map<std::uint64_t, std::vector<std::pair<Vec2, std::int64_t>>> grid_;
};

double loop_signed_area(const std::vector<Vec2>& pts) {
    double a = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec2& p = pts[i];
        const Vec2& q = pts[(i + 1) % pts.size()];
        a += p.cross(q);
    }
    return 0.5 * a;
}

void drop_near_duplicates(std::vector<Vec2>& pts, bool closed) {
    std::vector<Vec2> out;
    for (const Vec2& p : pts)
        if (out.empty() || (p - out.back()).norm() > kDistinctTol) out.push_back(p);
    if (closed && out.size() > 1 && (out.front() - out.back()).norm() <= kDistinctTol)
        out.pop_back();
    pts = std::move(out);
}

double polyline_length(const Polyline2& line) {
    double sum = 0;
    const std::size_t m = line.points.size();
    const std::size_t edges = line.closed ? m : m - 1;
    for (std::size_t i = 0; i < edges; ++i)
        sum += (line.points[(i + 1) % m] - line.points[i]).norm();
    return sum;
}

// Subdivide polyline edges to at most max_len, keeping original vertices.
// A uniformly dense input keeps the alpha boundary from cutting corners
// where the raw intersection points are sparse.
void densify_into(const Polyline2& line, double max_len, std::vector<Vec2>& out) {
    const std::size_t m = line.points.size();
    const std::size_t edges = line.closed ? m : m - 1;
    for (std::size_t i = 0; i < edges; ++i) {
        const Vec2& a = line.points[i];
        const Vec2& b = line.points[(i + 1) % m];
        out.push_back(a);
        const double len = (b - a).norm();
        const int pieces = static_cast<int>(std::ceil(len / max_len));
        for (int s = 1; s < pieces; ++s)
            out.push_back(a + (b - a) * (static_cast<double>(s) / pieces));
    }
    if (!line.closed) out.push_back(line.points.back());
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2 &a = poly[i], &b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) &&
            p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
            inside = !inside;
    }
    return inside;
}

}  // namespace

void ExtractionConfig::validate() const {
    if (slice_count < 1 || points_per_section < 1 || target_cloud_size < 1)
        fail("InvalidParams", "extraction counts must be positive");
    if (static_cast<long long>(target_cloud_size) >
        static_cast<long long>(slice_count) * points_per_section)
        fail("InvalidParams", "target_cloud_size " + std::to_string(target_cloud_size) +
                                  " exceeds slice_count*points_per_section");
    if (densify_factor <= 0 || curvature_radius_threshold <= 0)
        fail("InvalidParams", "densify_factor and curvature_radius_threshold must be positive");
}

SectionContour slice_mesh(const TriangleMesh& mesh, const Vec3& axis, double position) {
    SectionContour section;
    section.position = position;
    section.axis = axis.normalized();
    plane_basis(section.axis, section.basis_u, section.basis_v);

    auto project = [&](const Vec3& p) -> Vec2 {
        return {p.dot(section.basis_u), p.dot(section.basis_v)};
    };

    std::vector<Segment> segments;
    for (const auto& tri : mesh.triangles) {
        const Vec3 v[3] = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
        double d[3];
        int on = 0, pos = 0, neg = 0;
        for (int i = 0; i < 3; ++i) {
            d[i] = v[i].dot(section.axis) - position;
            if (std::abs(d[i]) <= kOnPlaneTol) {
                d[i] = 0;
                ++on;
            } else if (d[i] > 0) {
                ++pos;
            } else {
                ++neg;
            }
        }
        if (pos == 3 || neg == 3 || on == 3) continue;

        if (on == 2) {
            // Edge in the plane; emit once (positive third vertex) so the
            // shared edge of a watertight pair is not duplicated.
            if (pos != 1) continue;
            Vec2 a, b;
            bool first = true;
            for (int i = 0; i < 3; ++i)
                if (d[i] == 0) {
                    (first ? a : b) = project(v[i]);
                    first = false;
                }
            segments.push_back({a, b});
            continue;
        }
        if (on == 1 && (pos == 2 || neg == 2)) continue;  // vertex touch only

        Vec2 pts[2];
        int count = 0;
        if (on == 1) {
            for (int i = 0; i < 3; ++i)
                if (d[i] == 0) pts[count++] = project(v[i]);
        }
        for (int i = 0; i < 3 && count < 2; ++i) {
            int j = (i + 1) % 3;
            if (d[i] * d[j] < 0) {
                double t = d[i] / (d[i] - d[j]);
                pts[count++] = project(v[i] + (v[j] - v[i]) * t);
            }
        }
        if (count == 2 && (pts[0] - pts[1]).norm() > kDistinctTol)
            segments.push_back({pts[0], pts[1]});
    }

    if (segments.empty())
        fail("NoIntersection", "plane at position " + std::to_string(position) +
                                   " does not intersect the mesh");

    // Stitch segments into chains by endpoint proximity.
    EndpointIndex index(kStitchTol);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        index.insert(segments[i].a, static_cast<std::int64_t>(2 * i));
        index.insert(segments[i].b, static_cast<std::int64_t>(2 * i + 1));
    }
    std::vector<bool> used(segments.size(), false);

    auto take_match = [&](const Vec2& tip) -> std::int64_t {
        for (std::int64_t id : index.query(tip)) {
            if (!used[static_cast<std::size_t>(id / 2)]) return id;
        }
        return -1;
    };

    for (std::size_t start = 0; start < segments.size(); ++start) {
        if (used[start]) continue;
        used[start] = true;
        std::vector<Vec2> chain{segments[start].a, segments[start].b};

        for (int dir = 0; dir < 2; ++dir) {
            for (;;) {
                std::int64_t id = take_match(chain.back());
                if (id < 0) break;
                const auto si = static_cast<std::size_t>(id / 2);
                used[si] = true;
                chain.push_back(id % 2 == 0 ? segments[si].b : segments[si].a);
            }
            std::reverse(chain.begin(), chain.end());
        }

        bool closed = chain.size() > 2 && (chain.front() - chain.back()).norm() <= kCloseTol;
        Polyline2 line;
        line.closed = closed;
        line.points = std::move(chain);
        if (closed) line.points.pop_back();
        drop_near_duplicates(line.points, closed);

        if (closed && line.points.size() >= 3) {
            if (loop_signed_area(line.points) < 0)
                std::reverse(line.points.begin(), line.points.end());
            section.loops.push_back(std::move(line));
        } else if (!closed && line.points.size() >= 2) {
            section.open_chains.push_back(std::move(line));
        }
    }
    return section;
}

double auto_alpha(const std::vector<Vec2>& points) {
    const std::size_t n = points.size();
    if (n < 2) fail("DegenerateInput", "auto_alpha needs at least 2 points");
    std::vector<double> nn(n, HUGE_VAL);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = (points[i] - points[j]).norm2();
            nn[i] = std::min(nn[i], d2);
            nn[j] = std::min(nn[j], d2);
        }
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = std::sqrt(nn[i]);
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n / 2), d.end());
    return 2.0 * d[n / 2];
}

std::vector<Polyline2> alpha_shape_2d(const std::vector<Vec2>& points, double alpha) {
    if (alpha <= 0) fail("InvalidParams", "alpha must be positive");

    // Dedup exact-ish duplicates; they cannot carry boundary structure.
    std::vector<Vec2> pts;
    for (const Vec2& p : points) {
        bool dup = false;
        for (const Vec2& q : pts)
            if ((p - q).norm() <= 1e-12) {
                dup = true;
                break;
            }
        if (!dup) pts.push_back(p);
    }
    const std::size_t n = pts.size();
    if (n < 3) fail("DegenerateInput", "alpha shape needs at least 3 distinct points");

    // Collinearity check against the dominant span.
    double span = 0;
    std::size_t far_i = 1;
    for (std::size_t i = 1; i < n; ++i) {
        double d = (pts[i] - pts[0]).norm();
        if (d > span) {
            span = d;
            far_i = i;
        }
    }
    Vec2 dir = pts[far_i] - pts[0];
    bool collinear = true;
    for (const Vec2& p : pts)
        if (std::abs(dir.cross(p - pts[0])) > 1e-12 * span * span) {
            collinear = false;
            break;
        }
    if (collinear) fail("DegenerateInput", "all points are collinear");

    // An edge is alpha-exposed iff one of the two radius-alpha disks
    // through its endpoints contains no other point. The emptiness check
    // uses a guard margin of half the sampling spacing: disks that clear
    // the samples only by a sub-spacing knife edge (phase artifacts of
    // unevenly sampled corners) do not count as empty. The margin is
    // absolute, so it vanishes relative to large alphas and the convex
    // hull limit is unaffected.
    double h_est;
    {
        std::vector<double> nn(n, HUGE_VAL);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double d2 = (pts[i] - pts[j]).norm2();
                nn[i] = std::min(nn[i], d2);
                nn[j] = std::min(nn[j], d2);
            }
        std::nth_element(nn.begin(), nn.begin() + static_cast<std::ptrdiff_t>(n / 2), nn.end());
        h_est = std::sqrt(nn[n / 2]);
    }
    const double r2 = alpha * alpha;
    const double inside_r2 = r2 + 0.25 * h_est * h_est;
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            Vec2 d = pts[j] - pts[i];
            double len2 = d.norm2();
            if (len2 > 4.0 * r2 || len2 == 0.0) continue;
            Vec2 mid = (pts[i] + pts[j]) * 0.5;
            double h = std::sqrt(std::max(0.0, r2 - 0.25 * len2));
            Vec2 perp{-d.y, d.x};
            double pl = perp.norm();
            perp = perp * (h / pl);
            for (int side = 0; side < 2; ++side) {
                Vec2 c = side == 0 ? mid + perp : mid - perp;
                bool empty = true;
                for (std::size_t m = 0; m < n; ++m) {
                    if (m == i || m == j) continue;
                    if ((pts[m] - c).norm2() < inside_r2) {
                        empty = false;
                        break;
                    }
                }
                if (empty) {
                    edges.emplace_back(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j));
                    break;
                }
            }
        }

    // Chain edges into polylines, consuming lowest-index continuations
    // first for determinism.
    std::map<std::int64_t, std::vector<std::size_t>> adjacency;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        adjacency[edges[e].first].push_back(e);
        adjacency[edges[e].second].push_back(e);
    }
    std::vector<bool> edge_used(edges.size(), false);
    std::vector<Polyline2> result;

    for (std::size_t e0 = 0; e0 < edges.size(); ++e0) {
        if (edge_used[e0]) continue;
        edge_used[e0] = true;
        std::vector<std::int64_t> chain{edges[e0].first, edges[e0].second};

        for (int dir = 0; dir < 2; ++dir) {
            for (;;) {
                std::int64_t tip = chain.back();
                std::size_t next = SIZE_MAX;
                for (std::size_t e : adjacency[tip])
                    if (!edge_used[e]) {
                        next = e;
                        break;
                    }
                if (next == SIZE_MAX) break;
                edge_used[next] = true;
                chain.push_back(edges[next].first == tip ? edges[next].second
                                                         : edges[next].first);
                if (chain.back() == chain.front()) break;  // cycle closed
            }
            if (chain.back() == chain.front()) break;
            std::reverse(chain.begin(), chain.end());
        }

        Polyline2 line;
        line.closed = chain.size() > 3 && chain.front() == chain.back();
        if (line.closed) chain.pop_back();
        line.points.reserve(chain.size());
        for (std::int64_t idx : chain) line.points.push_back(pts[static_cast<std::size_t>(idx)]);

        if (line.closed && line.points.size() >= 3) {
            if (loop_signed_area(line.points) < 0)
                std::reverse(line.points.begin(), line.points.end());
            result.push_back(std::move(line));
        } else if (!line.closed && line.points.size() >= 2) {
            result.push_back(std::move(line));
        }
    }
    return result;
}

std::vector<double> polyline_curvature(const Polyline2& line) {
    const std::size_t m = line.points.size();
    std::vector<double> k(m, 0.0);
    if (m < 3) return k;

    auto curv = [&](std::size_t ia, std::size_t ib, std::size_t ic) {
        const Vec2 &a = line.points[ia], &b = line.points[ib], &c = line.points[ic];
        double lab = (b - a).norm(), lbc = (c - b).norm(), lca = (a - c).norm();
        double denom = lab * lbc * lca;
        if (denom <= 0) return 0.0;
        return 2.0 * (b - a).cross(c - b) / denom;
    };

    if (line.closed) {
        for (std::size_t i = 0; i < m; ++i) k[i] = curv((i + m - 1) % m, i, (i + 1) % m);
    } else {
        for (std::size_t i = 1; i + 1 < m; ++i) k[i] = curv(i - 1, i, i + 1);
        k[0] = k[1];
        k[m - 1] = k[m - 2];
    }
    return k;
}

std::vector<Vec2> curvature_adaptive_resample(const SectionContour& contour,
                                              const ExtractionConfig& config,
                                              double bbox_diagonal) {
    std::vector<const Polyline2*> lines;
    for (const auto& l : contour.loops) lines.push_back(&l);
    for (const auto& l : contour.open_chains) lines.push_back(&l);
    if (lines.empty()) fail("EmptyContour", "no loops or chains to resample");

    const double radius_threshold = config.curvature_radius_threshold * bbox_diagonal;
    const int total_target = config.points_per_section;

    struct Edge {
        Vec2 a, b;
        double w;  // weighted length
    };
    struct LineInfo {
        std::vector<Edge> edges;
        double weight = 0;
        bool closed = true;
    };

    std::vector<LineInfo> infos;
    double grand_total = 0;
    for (const Polyline2* lp : lines) {
        const auto& p = lp->points;
        const std::size_t m = p.size();
        auto k = polyline_curvature(*lp);
        LineInfo info;
        info.closed = lp->closed;
        const std::size_t edge_count = lp->closed ? m : m - 1;
        for (std::size_t i = 0; i < edge_count; ++i) {
            std::size_t j = (i + 1) % m;
            double len = (p[j] - p[i]).norm();
            if (len <= 0) continue;
            auto radius = [&](double kv) { return kv == 0 ? HUGE_VAL : 1.0 / std::abs(kv); };
            bool dense = std::min(radius(k[i]), radius(k[j])) < radius_threshold;
            double w = len * (dense ? config.densify_factor : 1.0);
            info.edges.push_back({p[i], p[j], w});
            info.weight += w;
        }
        grand_total += info.weight;
        infos.push_back(std::move(info));
    }
    if (grand_total <= 0) fail("EmptyContour", "contour has zero total length");

    // Largest-remainder apportionment of the sample budget.
    std::vector<int> alloc(infos.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < infos.size(); ++i) {
        double exact = total_target * infos[i].weight / grand_total;
        alloc[i] = static_cast<int>(std::floor(exact));
        assigned += alloc[i];
        remainders.push_back({-(exact - alloc[i]), i});  // negative for ascending sort
    }
    std::sort(remainders.begin(), remainders.end());
    for (int extra = 0; extra < total_target - assigned; ++extra)
        ++alloc[remainders[static_cast<std::size_t>(extra) % remainders.size()].second];

    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(total_target));
    for (std::size_t li = 0; li < infos.size(); ++li) {
        const LineInfo& info = infos[li];
        const int count = alloc[li];
        if (count <= 0 || info.edges.empty()) continue;
        const double step = info.weight / count;
        // closed loops sample at j*step from vertex 0; open chains offset
        // half a step so endpoints are not duplicated across chains
        double target = info.closed ? 0.0 : 0.5 * step;
        double walked = 0;
        std::size_t e = 0;
        for (int j = 0; j < count; ++j) {
            double s = target + j * step;
            while (e + 1 < info.edges.size() && walked + info.edges[e].w < s) {
                walked += info.edges[e].w;
                ++e;
            }
            const Edge& edge = info.edges[e];
            double t = edge.w > 0 ? (s - walked) / edge.w : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            out.push_back(edge.a + (edge.b - edge.a) * t);
        }
    }
    return out;
}

PointCloud extract_point_cloud(const TriangleMesh& mesh, const ExtractionConfig& config) {
    config.validate();
    if (mesh.empty()) fail("EmptyMesh", "cannot extract from an empty mesh");

    const BoundingBox box = bounding_box(mesh);
    const Vec3 axis = config.axis.normalized();
    double min_pos = HUGE_VAL, max_pos = -HUGE_VAL;
    for (const Vec3& v : mesh.vertices) {
        double d = v.dot(axis);
        min_pos = std::min(min_pos, d);
        max_pos = std::max(max_pos, d);
    }
    const double length = max_pos - min_pos;
    const double eps = 1e-3 * length;
    const double lo = min_pos + eps, hi = max_pos - eps;

    std::vector<Vec3> raw;
    raw.reserve(static_cast<std::size_t>(config.slice_count) *
                static_cast<std::size_t>(config.points_per_section));
    int good_stations = 0;
    for (int s = 0; s < config.slice_count; ++s) {
        double pos = config.slice_count == 1
                         ? 0.5 * (lo + hi)
                         : lo + (hi - lo) * s / static_cast<double>(config.slice_count - 1);
        try {
            SectionContour raw_section = slice_mesh(mesh, axis, pos);

            // uniform densification so the alpha boundary tracks the
            // section at a resolution independent of the mesh tessellation
            double total_len = 0;
            for (const auto& l : raw_section.loops) total_len += polyline_length(l);
            for (const auto& l : raw_section.open_chains) total_len += polyline_length(l);
            if (total_len <= 0) continue;
            const double max_seg = total_len / 600.0;

            std::vector<Vec2> pts;
            for (const auto& l : raw_section.loops) densify_into(l, max_seg, pts);
            for (const auto& l : raw_section.open_chains) densify_into(l, max_seg, pts);
            if (pts.size() < 3) continue;

            double alpha = config.alpha > 0 ? config.alpha : auto_alpha(pts);
            auto boundary = alpha_shape_2d(pts, alpha);

            SectionContour section;
            section.position = pos;
            section.axis = raw_section.axis;
            section.basis_u = raw_section.basis_u;
            section.basis_v = raw_section.basis_v;
            for (auto& line : boundary)
                (line.closed ? section.loops : section.open_chains).push_back(std::move(line));

            // keep only outermost silhouettes: a loop (or chain) nested
            // inside another loop is interior detail the section discards
            if (section.loops.size() + section.open_chains.size() > 1) {
                auto nested = [&](const Polyline2& line, std::size_t skip_loop) {
                    for (std::size_t li = 0; li < section.loops.size(); ++li) {
                        if (li == skip_loop) continue;
                        if (point_in_polygon(line.points[0], section.loops[li].points))
                            return true;
                    }
                    return false;
                };
                std::vector<Polyline2> outer_loops, outer_chains;
                for (std::size_t li = 0; li < section.loops.size(); ++li)
                    if (!nested(section.loops[li], li))
                        outer_loops.push_back(std::move(section.loops[li]));
                for (auto& chain : section.open_chains)
                    if (!nested(chain, SIZE_MAX)) outer_chains.push_back(std::move(chain));
                section.loops = std::move(outer_loops);
                section.open_chains = std::move(outer_chains);
            }
            if (section.loops.empty() && section.open_chains.empty()) continue;

            auto samples = curvature_adaptive_resample(section, config, box.diagonal());
            for (const Vec2& p : samples) raw.push_back(section.lift(p));
            ++good_stations;
        } catch (const Error& e) {
            if (e.kind() == "NoIntersection" || e.kind() == "DegenerateInput" ||
                e.kind() == "EmptyContour")
                continue;
            throw;
        }
    }

    if (good_stations < 3)
        fail("InsufficientGeometry", "only " + std::to_string(good_stations) +
                                         " slicing stations intersect the mesh (need 3)");
    if (raw.size() < static_cast<std::size_t>(config.target_cloud_size))
        fail("InsufficientGeometry",
             "sections produced " + std::to_string(raw.size()) + " points, target is " +
                 std::to_string(config.target_cloud_size));

    auto idx = farthest_point_indices(raw, static_cast<std::size_t>(config.target_cloud_size));
    std::vector<Vec3> selected;
    selected.reserve(idx.size());
    for (std::size_t i : idx) selected.push_back(raw[i]);
    return normalize_cloud(selected, PointCloud::Source::sectional);
}

PointCloud uniform_surface_sample(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    if (mesh.empty()) fail("EmptyMesh", "cannot sample an empty mesh");

    std::vector<double> cumulative(mesh.triangles.size());
    double total = 0;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        Vec3 cr = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                      .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        total += 0.5 * cr.norm();
        cumulative[i] = total;
    }
    if (total <= 0) fail("EmptyMesh", "mesh has zero surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> raw;
    raw.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        double r = uni(rng) * total;
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        std::size_t ti = static_cast<std::size_t>(it - cumulative.begin());
        if (ti >= mesh.triangles.size()) ti = mesh.triangles.size() - 1;
        const auto& t = mesh.triangles[ti];
        double su = std::sqrt(uni(rng));
        double v = uni(rng);
        // barycentric: (1-su, su*(1-v), su*v) is uniform over the triangle
        Vec3 p = mesh.vertices[t[0]] * (1.0 - su) + mesh.vertices[t[1]] * (su * (1.0 - v)) +
                 mesh.vertices[t[2]] * (su * v);
        raw.push_back(p);
    }
    return normalize_cloud(raw, PointCloud::Source::uniform_surface);
}

}  // namespace drag
