#pragma once

#include <array>
#include <utility>
#include <vector>

#include "singflow/geometry.hpp"
#include "singflow/series.hpp"

namespace singflow {

enum class ConeKind { OTC, CTC };

// Tangent cone of S0 at the origin, probed through secant directions p/|p|
// on shrinking radial slices.
struct TangentConeReport {
    ConeKind kind = ConeKind::OTC;
    Vec3 direction = Vec3::Zero();  // CTC only: the limit direction, unit norm
    double secant_spread = 0.0;     // angular diameter at the smallest probed scale
};

TangentConeReport classify_tangent_cone(const Surface& s, double ctc_threshold = 0.05);

// Rotation R with R * direction = +z; directions within 1e-6 of a signed
// coordinate axis snap to the exact axis map.
Mat3 adapted_rotation(const Vec3& direction);

// Surface in the rotated coordinates y = R x.
Surface rotate_surface(const Surface& s, const Mat3& R);

// Growth exponents in adapted coordinates: nu from the slice radius
// h(z) = max |x| at height z, e from the diameter of the x-projection of the
// slab {height <= z} (origin included). Both fitted on a log grid spanning
// three decades and snapped to rationals. Throws "coordinates not adapted"
// when the fitted exponent is <= 1.
Rational estimate_nu(const Surface& s);
Rational estimate_e(const Surface& s);

// Analytic half-branch on S0 used as the new z-axis: components of
// w -> (theta1(w), theta2(w), w^N) as series in w. Traced from the argmin of
// |x| per height slice (tie-break: smallest angle on the top slice).
std::array<GenSeries, 3> find_branch(const Surface& s);

// Opening blow-up: polar coordinates in the OTC case, the ramified map
// beta(y, w) = (w^{eN} y + theta(w), w^N) in the CTC case.
struct OpeningBlowup {
    ConeKind variant = ConeKind::OTC;
    double epsilon0 = 0.5;
    // CTC data; e is the opening exponent (spread of the slice around the
    // branch), which can exceed the slab-diameter exponent of estimate_e.
    Rational e = Rational(1);
    Rational nu = Rational(1);
    int N = 1;
    std::array<GenSeries, 3> theta;
    int m = 1;  // min order of the theta components minus 1

    SliceKind slice_kind() const {
        return variant == ConeKind::OTC ? SliceKind::Radial : SliceKind::Height;
    }
    // Forward map. OTC: y on the unit sphere, w = |p|. CTC: y = (y1, y2, 0).
    Vec3 forward(const Vec3& y, double w) const;
    // Inverse on {slice > 0}; returns (y, w).
    std::pair<Vec3, double> inverse(const Vec3& p) const;
};

// Builds the blow-up for s (already in adapted coordinates in the CTC case).
OpeningBlowup make_opening(const Surface& s);

// Slice traces mapped through beta^{-1} at shrinking levels, plus their
// consecutive Hausdorff distances. Throws "blow-up does not open the
// surface" when the traces diverge.
struct AccumulationResult {
    std::vector<double> levels;
    std::vector<std::vector<Vec3>> traces;  // blow-up coordinates
    std::vector<double> hausdorff;
};

AccumulationResult accumulation_set(const Surface& s, const OpeningBlowup& b,
                                    int n_levels);

// Numerical cylinder chart: the top slice is parameterized by normalized
// arclength, labels propagate to smaller slices along the descent of the
// retraction field grad(-slice^2) restricted to S0.
struct CylinderChart {
    double epsilon = 0.0;
    SliceKind kind = SliceKind::Radial;
    std::vector<double> phi_grid;           // n_phi uniform angles in [0, 2pi)
    std::vector<double> r_grid;             // decreasing geometric levels
    std::vector<std::vector<Vec3>> points;  // [level][phi]
    std::vector<std::pair<double, double>> omega_flags;  // suspect phi intervals

    // Catmull-Rom interpolation in (phi, log r); phi periodic.
    Vec3 at(double phi, double r) const;
    // Angle label of an on-surface point, inverted on its own slice level.
    double locate_phi(const Vec3& p) const;
};

CylinderChart build_chart(const Surface& s, const OpeningBlowup& b, double epsilon,
                          int n_phi, int n_r, double r_min = 1e-6);

}  // namespace singflow
