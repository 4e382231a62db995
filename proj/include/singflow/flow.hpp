#pragma once

#include <array>
#include <functional>
#include <vector>

#include "singflow/blowup.hpp"
#include "singflow/geometry.hpp"
#include "singflow/series.hpp"

namespace singflow {

enum class StopReason { ReachedRmin, LeftDomain, StepFailure, MaxTime };

struct TrajectorySample {
    double t = 0.0;
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();  // restricted gradient at p, direction applied
    double f_value = 0.0;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    StopReason stop_reason = StopReason::MaxTime;
    SliceKind slice_kind = SliceKind::Radial;
};

// Adaptive Runge-Kutta flow of direction * grad(f|_S0) with per-step surface
// re-projection. Stops at slice < r_min, |p| > epsilon0, or t_max.
Trajectory integrate(const Surface& s, const Metric& m, const PolyFunction& f,
                     const Vec3& p0, int direction, double r_min, double t_max,
                     SliceKind kind = SliceKind::Radial);

// Pullback of the ambient metric through the chart: the first fundamental
// form A dr^2 + 2B dr dphi + C dphi^2 sampled on the chart grid.
struct MetricFields {
    std::vector<std::vector<double>> A, B, C;  // [level][phi]
};

MetricFields pullback_metric(const CylinderChart& chart, const Metric& m);

// The gradient system transported to the cylinder, up to the positive factor
// det(metric): (rdot, phidot) = (C f_r - B f_phi, -B f_r + A f_phi).
struct CylinderSystem {
    std::vector<double> phi_grid;
    std::vector<double> r_grid;  // decreasing geometric
    std::vector<std::vector<double>> rdot, phidot;  // [level][phi]
    MetricFields metric;
    std::vector<std::pair<double, double>> omega_flags;
    std::vector<ExponentFit> rdot_exponents, phidot_exponents;  // per phi

    double rdot_at(double phi, double r) const;
    double phidot_at(double phi, double r) const;
};

CylinderSystem transformed_system(const CylinderChart& chart, const Surface& s,
                                  const Metric& m, const PolyFunction& f);

// Synthetic system sampled from callables (r, phi) -> value, for tests and
// the direct-classification CLI path.
CylinderSystem synthetic_system(const std::function<double(double, double)>& rdot,
                                const std::function<double(double, double)>& phidot,
                                double r_hi, double r_lo, int n_phi, int n_r);

struct CylinderSample {
    double t = 0.0;  // arclength in (phi, log r); the field is integrated
                     // at unit speed there, which only reparameterizes time
    double phi_unwound = 0.0;
    double r = 0.0;
};

struct CylinderTrajectory {
    std::vector<CylinderSample> samples;
    StopReason stop_reason = StopReason::MaxTime;
};

CylinderTrajectory chart_integrate(const CylinderSystem& sys, double phi0, double r0,
                                   double r_min, double t_max = 1e6);

// Non-stationary trajectory accumulating at the origin: direct descent when
// f|_S0 has constant sign near the origin, otherwise bisection over a
// transversal arc after replacing f by -f^2.
Trajectory find_accumulating_trajectory(const Surface& s, const Metric& m,
                                        const PolyFunction& f, double r_min = 1e-4,
                                        SliceKind kind = SliceKind::Radial);

// Truncated asymptotic expansion of an accumulating trajectory,
// re-parameterized by the slice value.
struct SeparatrixExpansion {
    std::array<GenSeries, 3> gamma;
    std::array<double, 3> residuals;
    bool quality_ok = true;
};

SeparatrixExpansion separatrix_expansion(const Trajectory& tr);

}  // namespace singflow
