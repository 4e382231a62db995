#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <string>

#include "doctest.h"
#include "singflow/error.hpp"
#include "singflow/pipeline.hpp"
#include "singflow/svg.hpp"

using namespace singflow;

namespace {

PolyFunction mono(int px, int py, int pz, double c) {
    return PolyFunction::monomial(px, py, pz, c);
}

Scenario cusp_scenario() {
    Scenario sc;
    sc.surface.equation = mono(2, 0, 0, 1) + mono(0, 2, 0, 1) - mono(0, 0, 5, 1);
    sc.surface.seed = Vec3(0.3, 0, 0.45);
    sc.function = mono(0, 0, 1, -1);
    return sc;
}

Scenario saddle_scenario() {
    Scenario sc;
    sc.surface.equation = mono(0, 0, 1, 1);
    sc.surface.seed = Vec3(0.3, 0, 0);
    sc.function = mono(2, 0, 0, 1) - mono(0, 2, 0, 1);
    return sc;
}

}  // namespace

TEST_CASE("analyze on the cusp reproduces the growth exponents") {
    const Scenario sc = cusp_scenario();
    const AnalyzeResult r = analyze(sc);
    CHECK(r.cone.kind == ConeKind::CTC);
    CHECK(r.exponents_valid);
    CHECK(r.nu == Rational(5, 2));
    CHECK(r.e == Rational(5, 2));
    CHECK(r.classification.kind == FlowClass::Dicritical);
    const std::string report = analyze_report(sc, r);
    CHECK(report.find("nu = 5/2, e = 5/2") != std::string::npos);
    CHECK(report.find("verdict=Dicritical") != std::string::npos);
    CHECK(report.find("parameters:") != std::string::npos);
}

TEST_CASE("analyze on the saddle pair lands in the angular branch") {
    const Scenario sc = saddle_scenario();
    const AnalyzeResult r = analyze(sc);
    CHECK(r.cone.kind == ConeKind::OTC);
    CHECK(!r.exponents_valid);
    CHECK(r.classification.kind == FlowClass::NonMonodromic);
    CHECK(r.classification.mu == Rational(2));
    CHECK(!r.winding.spiraling);
    const std::string report = analyze_report(sc, r);
    CHECK(report.find("verdict=NonMonodromic") != std::string::npos);
}

TEST_CASE("repeated analysis produces byte-identical artifacts") {
    const Scenario sc = saddle_scenario();
    const AnalyzeResult a = analyze(sc);
    const AnalyzeResult b = analyze(sc);
    CHECK(chart_csv(a.chart) == chart_csv(b.chart));
    CHECK(analyze_report(sc, a) == analyze_report(sc, b));

    const Trajectory ta = integrate(sc.surface, sc.metric, sc.function,
                                    Vec3(0.2, 0.1, 0), 1, 1e-3, 1e9);
    const Trajectory tb = integrate(sc.surface, sc.metric, sc.function,
                                    Vec3(0.2, 0.1, 0), 1, 1e-3, 1e9);
    CHECK(trajectory_csv(ta) == trajectory_csv(tb));
}

TEST_CASE("stage failures carry the stage name") {
    Scenario sc = saddle_scenario();
    sc.surface.equation = mono(0, 0, 0, 1) + mono(0, 0, 1, 1);  // F(0) = 1
    CHECK_THROWS_WITH_AS(analyze(sc), doctest::Contains("stage surface"),
                         NumericalError);
}

TEST_CASE("csv writers emit fixed headers") {
    const Scenario sc = saddle_scenario();
    const Trajectory tr = integrate(sc.surface, sc.metric, sc.function,
                                    Vec3(0.2, 0.1, 0), 1, 1e-3, 1e9);
    const std::string csv = trajectory_csv(tr);
    CHECK(csv.rfind("t,x,y,z,r,phi_unwound,f\n", 0) == 0);
    CylinderTrajectory cyl;
    cyl.samples.push_back({0.0, 1.0, 0.5});
    CHECK(cylinder_csv(cyl).rfind("t,phi_unwound,r\n", 0) == 0);
    const AnalyzeResult r = analyze(sc);
    CHECK(chart_csv(r.chart).rfind("phi,r,x,y,z,omega_flag\n", 0) == 0);
}

TEST_CASE("svg plots are self-contained documents") {
    SvgSeries s;
    s.color = "#1f6fb2";
    s.label = "probe";
    for (int i = 0; i < 20; ++i) s.points.push_back({0.1 * i, std::sin(0.3 * i)});
    const std::string svg = svg_plot({s}, "x", "y", "demo");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("href") == std::string::npos);  // no external assets
}
