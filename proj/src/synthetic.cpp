#include "drag/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <numbers>
#include <random>

#include "drag/error.hpp"

namespace drag {
namespace {

// station layout shared by the profile functions and the tessellation
constexpr double kNoseEnd = 0.10;
constexpr double kWindshieldStart = 0.30;
constexpr double kTailStart = 0.64;
constexpr double kTailWidthDrop = 0.35;
constexpr double kTailHeightDrop = 0.55;
constexpr int kStations = 64;  // lofting segments along x
constexpr int kRingVerts = 48;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct Profile {
    double w;   // width fraction in [0,1]
    double zt;  // roof height fraction in [0,1]
};

// Piecewise body profile: nose ramp, hood plateau, windshield rise at the
// slope set by the windshield angle, roof plateau, quadratic tail taper.
Profile body_profile(const ShapeParams& p, double t) {
    const double hood = 1.0 - p.cabin_ratio;
    double run = p.cabin_ratio * p.height / (std::tan(deg2rad(p.windshield_deg)) * p.length);
    run = std::clamp(run, 0.03, 0.32);
    const double roof_start = kWindshieldStart + run;

    Profile f{1.0, 1.0};
    if (t < kNoseEnd) {
        double r = std::pow(t / kNoseEnd, 1.0 / p.bluntness);
        f.w = r;
        f.zt = hood * r;
    } else if (t < kWindshieldStart) {
        f.zt = hood;
    } else if (t < roof_start) {
        f.zt = hood + p.cabin_ratio * (t - kWindshieldStart) / run;
    } else if (t <= kTailStart) {
        f.zt = 1.0;
    } else {
        double s = (t - kTailStart) / (1.0 - kTailStart);
        f.w = 1.0 - kTailWidthDrop * p.taper * s * s;
        f.zt = 1.0 - kTailHeightDrop * p.taper * s * s;
    }
    return f;
}

void validate_params(const ShapeParams& p) {
    if (!ParamBox::validity().contains(p))
        fail("InvalidParams", "shape parameters outside the accepted ranges");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

const ParamBox& ParamBox::sampling() {
    static const ParamBox box{{4.0, 4.8},   {1.55, 1.75}, {1.22, 1.42}, {2.0, 12.0},
                              {0.0, 1.0},   {0.24, 0.38}, {25.0, 60.0}};
    return box;
}

const ParamBox& ParamBox::validity() {
    static const ParamBox box{{3.0, 6.0},   {1.2, 2.2},   {1.0, 2.2},   {2.0, 50.0},
                              {0.0, 1.0},   {0.0, 0.5},   {15.0, 75.0}};
    return box;
}

bool ParamBox::contains(const ShapeParams& p) const {
    auto in = [](double v, ParamRange r) { return v >= r.lo && v <= r.hi; };
    return in(p.length, length) && in(p.width, width) && in(p.height, height) &&
           in(p.bluntness, bluntness) && in(p.taper, taper) && in(p.cabin_ratio, cabin_ratio) &&
           in(p.windshield_deg, windshield_deg);
}

double superellipse_area_ratio(double exponent) {
    const double a = std::tgamma(1.0 + 1.0 / exponent);
    return a * a / std::tgamma(1.0 + 2.0 / exponent);
}

TriangleMesh generate_body(const ShapeParams& p) {
    validate_params(p);

    TriangleMesh mesh;
    auto ring_vertex = [&](double t, int j) -> Vec3 {
        Profile f = body_profile(p, t);
        const double a = 0.5 * p.width * f.w;
        const double b = 0.5 * p.height * f.zt;
        const double zc = b;  // body sits on the ground plane z=0
        const double phi = 2.0 * std::numbers::pi * j / kRingVerts;
        const double c = std::cos(phi), s = std::sin(phi);
        const double e = 2.0 / p.bluntness;
        double y = a * std::copysign(std::pow(std::abs(c), e), c);
        double z = zc + b * std::copysign(std::pow(std::abs(s), e), s);
        return {t * p.length, y, z};
    };

    // tip vertex, then one ring per interior station, then the tail cap center
    mesh.vertices.push_back({0.0, 0.0, 0.0});
    for (int i = 1; i <= kStations; ++i) {
        double t = static_cast<double>(i) / kStations;
        for (int j = 0; j < kRingVerts; ++j) mesh.vertices.push_back(ring_vertex(t, j));
    }
    Profile tail = body_profile(p, 1.0);
    mesh.vertices.push_back({p.length, 0.0, 0.5 * p.height * tail.zt});
    const auto cap = static_cast<std::uint32_t>(mesh.vertices.size() - 1);

    auto ring_base = [&](int i) { return static_cast<std::uint32_t>(1 + (i - 1) * kRingVerts); };

    for (int j = 0; j < kRingVerts; ++j) {
        int jn = (j + 1) % kRingVerts;
        mesh.triangles.push_back({0u, ring_base(1) + static_cast<std::uint32_t>(jn),
                                  ring_base(1) + static_cast<std::uint32_t>(j)});
    }
    for (int i = 1; i < kStations; ++i) {
        std::uint32_t r0 = ring_base(i), r1 = ring_base(i + 1);
        for (int j = 0; j < kRingVerts; ++j) {
            auto jn = static_cast<std::uint32_t>((j + 1) % kRingVerts);
            auto ju = static_cast<std::uint32_t>(j);
            mesh.triangles.push_back({r0 + ju, r0 + jn, r1 + ju});
            mesh.triangles.push_back({r0 + jn, r1 + jn, r1 + ju});
        }
    }
    std::uint32_t last = ring_base(kStations);
    for (int j = 0; j < kRingVerts; ++j) {
        auto jn = static_cast<std::uint32_t>((j + 1) % kRingVerts);
        mesh.triangles.push_back({last + static_cast<std::uint32_t>(j), last + jn, cap});
    }
    mesh.recompute_normals();
    return mesh;
}

double pseudo_drag(const ShapeParams& p) {
    validate_params(p);
    const ParamBox& box = ParamBox::sampling();

    const double u_blunt =
        clamp01((p.bluntness - box.bluntness.lo) / (box.bluntness.hi - box.bluntness.lo));
    const double u_taper = 1.0 - p.taper;
    auto sin2 = [](double deg) {
        double s = std::sin(deg2rad(deg));
        return s * s;
    };
    const double u_wind = clamp01((sin2(p.windshield_deg) - sin2(box.windshield_deg.lo)) /
                                  (sin2(box.windshield_deg.hi) - sin2(box.windshield_deg.lo)));
    const double frontal_area = p.width * p.height * superellipse_area_ratio(p.bluntness);

    return 0.12 + 0.25 * u_blunt + 0.30 * u_taper + 0.10 * u_wind + 0.05 * (frontal_area / 2.5);
}

double cd_from_force(double fd_newtons, double rho, double u, double a_ref) {
    if (rho <= 0 || u <= 0 || a_ref <= 0)
        fail("NonPositiveDenominator", "rho, u and a_ref must all be positive");
    return 2.0 * fd_newtons / (rho * u * u * a_ref);
}

std::vector<ShapeParams> sample_params(int n, std::uint64_t seed) {
    if (n < 10) fail("InvalidParams", "dataset needs n >= 10, got " + std::to_string(n));
    const ParamBox& box = ParamBox::sampling();
    std::mt19937_64 rng(seed);

    // Latin hypercube: one stratum per sample and dimension, shuffled
    // independently per dimension with a jittered position inside each.
    auto lhs_column = [&](ParamRange r) {
        std::vector<double> vals(static_cast<std::size_t>(n));
        std::vector<int> strata(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = i;
        std::shuffle(strata.begin(), strata.end(), rng);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < n; ++i)
            vals[static_cast<std::size_t>(i)] =
                r.lo + (strata[static_cast<std::size_t>(i)] + u(rng)) * (r.hi - r.lo) / n;
        return vals;
    };

    auto lengths = lhs_column(box.length);
    auto widths = lhs_column(box.width);
    auto heights = lhs_column(box.height);
    auto blunts = lhs_column(box.bluntness);
    auto tapers = lhs_column(box.taper);
    auto cabins = lhs_column(box.cabin_ratio);
    auto shields = lhs_column(box.windshield_deg);

    std::vector<ShapeParams> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& p = out[static_cast<std::size_t>(i)];
        p.length = lengths[static_cast<std::size_t>(i)];
        p.width = widths[static_cast<std::size_t>(i)];
        p.height = heights[static_cast<std::size_t>(i)];
        p.bluntness = blunts[static_cast<std::size_t>(i)];
        p.taper = tapers[static_cast<std::size_t>(i)];
        p.cabin_ratio = cabins[static_cast<std::size_t>(i)];
        p.windshield_deg = shields[static_cast<std::size_t>(i)];
        p.seed = seed + static_cast<std::uint64_t>(i);
    }
    return out;
}

std::vector<DragSample> make_dataset(int n, std::uint64_t seed,
                                     const ExtractionConfig& extraction, int threads) {
    auto params = sample_params(n, seed);

    std::vector<DragSample> samples(static_cast<std::size_t>(n));
    auto build_one = [&](int i) {
        const ShapeParams& p = params[static_cast<std::size_t>(i)];
        TriangleMesh mesh = generate_body(p);
        DragSample s;
        s.cloud = extract_point_cloud(mesh, extraction);
        s.cd = pseudo_drag(p);
        char buf[32];
        std::snprintf(buf, sizeof buf, "synth_%05d", i);
        s.id = buf;
        samples[static_cast<std::size_t>(i)] = std::move(s);
    };

    threads = std::max(1, threads);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) build_one(i);
    } else {
        // samples land in their slot by index, so the result is identical
        // to the sequential run
        std::atomic<int> next{0};
        std::vector<std::future<void>> workers;
        for (int w = 0; w < threads; ++w)
            workers.push_back(std::async(std::launch::async, [&] {
                for (;;) {
                    int i = next.fetch_add(1);
                    if (i >= n) return;
                    build_one(i);
                }
            }));
        for (auto& w : workers) w.get();
    }
    return samples;
}

}  // namespace drag
