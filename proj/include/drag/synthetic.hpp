#pragma once

#include <cstdint>
#include <vector>

#include "drag/contour.hpp"
#include "drag/data.hpp"
#include "drag/mesh.hpp"

namespace drag {

/// Parametric vehicle-like body. Lengths in meters, windshield angle in
/// degrees from horizontal, taper in [0,1] (1 = fully streamlined tail),
/// bluntness is the superellipse exponent of the cross sections.
struct ShapeParams {
    double length = 4.4;
    double width = 1.65;
    double height = 1.32;
    double bluntness = 4.0;
    double taper = 0.5;
    double cabin_ratio = 0.30;
    double windshield_deg = 40.0;
    std::uint64_t seed = 0;
};

/// Closed parameter intervals. `sampling` is the box make_dataset draws
/// from and the box the label terms are normalized over; `validity` is
/// the wider box generate_body/pseudo_drag accept.
struct ParamRange {
    double lo, hi;
};
struct ParamBox {
    ParamRange length, width, height, bluntness, taper, cabin_ratio, windshield_deg;
    static const ParamBox& sampling();
    static const ParamBox& validity();
    bool contains(const ShapeParams& p) const;
};

/// Area of a unit-box superellipse cross section relative to its bounding
/// rectangle: Gamma(1+1/n)^2 / Gamma(1+2/n) * 4 ... normalized to W*H.
double superellipse_area_ratio(double exponent);

/// Watertight superellipse-lofted body, deterministic in params.
TriangleMesh generate_body(const ShapeParams& params);

/// Analytic pseudo-drag label. With u(.) the [0,1]-clamped normalization
/// of a parameter over its sampling range:
///   cd = 0.12 + 0.25*u(bluntness) + 0.30*(1 - taper)
///        + 0.10*u(sin^2 windshield) + 0.05*(frontal_area / 2.5)
/// where frontal_area = width*height*superellipse_area_ratio(bluntness).
double pseudo_drag(const ShapeParams& params);

/// Eq-style drag coefficient from force: 2*fd / (rho * u^2 * a_ref).
double cd_from_force(double fd_newtons, double rho, double u, double a_ref);

/// Latin-hypercube sample of the sampling box; each sample is meshed,
/// run through sectional extraction, and labeled with pseudo_drag.
/// Deterministic in (n, seed) regardless of thread count.
std::vector<DragSample> make_dataset(int n, std::uint64_t seed,
                                     const ExtractionConfig& extraction = {}, int threads = 1);

/// The Latin-hypercube parameter draw alone (exposed for oracles).
std::vector<ShapeParams> sample_params(int n, std::uint64_t seed);

}  // namespace drag
