#pragma once

#include <string>
#include <vector>

#include "singflow/blowup.hpp"
#include "singflow/flow.hpp"

namespace singflow {

// Asymptotic expansion of f pulled back to the cylinder chart:
// f(Phi(phi, r)) = sum_k a_k(phi) r^{alpha_k} + smaller. Each strip carries
// its angular profile sampled on the chart phi grid.
struct ExpansionStrip {
    Rational alpha;
    std::vector<double> profile;
    bool constant = false;
    double mean = 0.0;
};

struct AsymptoticExpansion {
    std::vector<ExpansionStrip> strips;
    // Constant strips preceding the first non-constant one, as a series in r.
    GenSeries pure_series;
    bool pure = true;
};

AsymptoticExpansion asymptotic_expansion(const CylinderChart& chart,
                                         const PolyFunction& f, int max_strips = 4,
                                         double constancy = 1e-3);

// Direction reversals of phi along a cylinder trajectory, counted with a
// hysteresis band so grid-level jitter does not register as oscillation.
struct OscillationReport {
    int reversals = 0;
    bool oscillating = false;
};

OscillationReport oscillation_test(const CylinderTrajectory& tr,
                                   double hysteresis = 0.05);

// Winding probes: trajectories started at several angles, wound down to the
// bottom of the chart. Spiraling means every probe makes more than
// `min_turns` monotone turns of a common sign.
struct SpiralingReport {
    bool spiraling = false;
    double min_turns = 0.0;
    // winding per unit of -log r for the deepest probe
    double winding_slope = 0.0;
};

// A winding slope of 1 per log r yields only ~1.8 turns over five decades,
// so the default turn threshold is deliberately modest.
SpiralingReport detect_spiraling(const CylinderSystem& sys, double min_turns = 1.25);

// Leading normal form of the transported system near r = 0.
enum class FlowClass { Dicritical, NonMonodromic, Spiraling, Undetermined };

struct Classification {
    FlowClass kind = FlowClass::Undetermined;
    Rational mu;   // leading exponent of the normal form
    Rational eta;  // angular subordination exponent (dicritical case)
    double winding_slope = 0.0;  // spiraling case
    std::string evidence;
};

// Decision order: dicritical (sign-definite radial profile, subordinate
// angular field), non-monodromic (subordinate radial field, sign-changing
// zero-mean angular profile), spiraling (winding probes), undetermined.
Classification classify_system(const CylinderSystem& sys, double spiral_min_turns = 1.25);

}  // namespace singflow
