#pragma once

#include <string>
#include <vector>

#include "singflow/classify.hpp"
#include "singflow/scenario.hpp"

namespace singflow {

struct AnalyzeResult {
    TangentConeReport cone;
    Surface adapted;           // surface in the coordinates the pipeline used
    Metric adapted_metric;
    PolyFunction adapted_function;
    bool exponents_valid = false;  // CTC only
    Rational nu, e;
    OpeningBlowup opening;
    CylinderChart chart;
    CylinderSystem system;
    AsymptoticExpansion expansion;
    Classification classification;
    SpiralingReport winding;
};

// Full analysis pipeline: tangent cone -> adapted coordinates -> growth
// exponents -> opening blow-up -> chart -> pullback -> expansion ->
// classification. Stage failures rethrow with the stage name prefixed.
AnalyzeResult analyze(const Scenario& sc);

// Structured text report citing verdicts and the parameters of every stage.
std::string analyze_report(const Scenario& sc, const AnalyzeResult& r);

// CSV artifacts with fixed %.12g formatting (byte-stable for a given input).
std::string trajectory_csv(const Trajectory& tr);
std::string cylinder_csv(const CylinderTrajectory& tr);
std::string chart_csv(const CylinderChart& chart);

// Azimuths of the trajectory samples, unwrapped sample to sample.
std::vector<double> unwound_azimuth(const Trajectory& tr);

}  // namespace singflow
