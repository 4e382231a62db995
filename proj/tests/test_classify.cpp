#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "singflow/classify.hpp"
#include "singflow/error.hpp"

using namespace singflow;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

PolyFunction mono(int px, int py, int pz, double c) {
    return PolyFunction::monomial(px, py, pz, c);
}

Surface plane_surface() {
    Surface s;
    s.equation = mono(0, 0, 1, 1);
    s.seed = Vec3(0.3, 0, 0);
    s.epsilon0 = 0.5;
    return s;
}

Surface cone_surface() {
    Surface s;
    s.equation = mono(2, 0, 0, 1) + mono(0, 2, 0, 1) - mono(0, 0, 2, 1);
    s.seed = Vec3(0.2, 0, 0.2);
    s.epsilon0 = 0.5;
    return s;
}

CylinderChart plane_chart() {
    const Surface s = plane_surface();
    return build_chart(s, make_opening(s), 0.3, 64, 72, 2e-4);
}

const ExpansionStrip* find_strip(const AsymptoticExpansion& ae, const Rational& a) {
    for (const auto& strip : ae.strips)
        if (strip.alpha == a) return &strip;
    return nullptr;
}

}  // namespace

TEST_CASE("asymptotic_expansion: height on the cone is pure linear") {
    const Surface s = cone_surface();
    const CylinderChart chart = build_chart(s, make_opening(s), 0.3, 64, 72, 2e-4);
    const AsymptoticExpansion ae = asymptotic_expansion(chart, mono(0, 0, 1, 1));
    CHECK(ae.pure);
    REQUIRE(ae.strips.size() >= 1);
    CHECK(ae.strips[0].alpha == Rational(1));
    CHECK(ae.strips[0].constant);
    CHECK(ae.strips[0].mean == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));
    CHECK(ae.pure_series.evaluate(0.01) ==
          doctest::Approx(0.01 / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("asymptotic_expansion: a coordinate on the plane has a cosine strip") {
    const AsymptoticExpansion ae =
        asymptotic_expansion(plane_chart(), mono(1, 0, 0, 1));
    CHECK(!ae.pure);
    const ExpansionStrip* strip = find_strip(ae, Rational(1));
    REQUIRE(strip != nullptr);
    CHECK(!strip->constant);
    double amp = 0.0;
    for (double v : strip->profile) amp = std::max(amp, std::abs(v));
    CHECK(amp == doctest::Approx(1.0).epsilon(5e-3));
    CHECK(std::abs(strip->mean) < 5e-3);
}

TEST_CASE("asymptotic_expansion: mixed pure and angular strips") {
    const PolyFunction f = mono(2, 0, 0, 1) + mono(0, 2, 0, 1) + mono(3, 0, 0, 1);
    const AsymptoticExpansion ae = asymptotic_expansion(plane_chart(), f);
    CHECK(!ae.pure);
    const ExpansionStrip* s2 = find_strip(ae, Rational(2));
    REQUIRE(s2 != nullptr);
    CHECK(s2->constant);
    CHECK(s2->mean == doctest::Approx(1.0).epsilon(1e-3));
    const ExpansionStrip* s3 = find_strip(ae, Rational(3));
    REQUIRE(s3 != nullptr);
    CHECK(!s3->constant);
    // the pure part stops before the angular strip
    CHECK(ae.pure_series.size() == 1);
    CHECK(ae.pure_series.evaluate(0.1) == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("asymptotic_expansion: vanishing functions are rejected") {
    CHECK_THROWS_AS(asymptotic_expansion(plane_chart(), mono(0, 0, 1, 1)),
                    PreconditionError);
}

TEST_CASE("classify_system: radial descent on the plane is dicritical") {
    const Surface s = plane_surface();
    const CylinderChart chart = plane_chart();
    const PolyFunction f = mono(2, 0, 0, -1) + mono(0, 2, 0, -1);
    const CylinderSystem sys = transformed_system(chart, s, Metric(), f);
    const Classification cl = classify_system(sys);
    CHECK(cl.kind == FlowClass::Dicritical);
    CHECK(cl.mu == Rational(3));
    CHECK(cl.eta == Rational(1));
}

TEST_CASE("classify_system: the planar saddle is non-monodromic") {
    const Surface s = plane_surface();
    const CylinderChart chart = plane_chart();
    const PolyFunction f = mono(2, 0, 0, 1) + mono(0, 2, 0, -1);
    const CylinderSystem sys = transformed_system(chart, s, Metric(), f);
    const Classification cl = classify_system(sys);
    CHECK(cl.kind == FlowClass::NonMonodromic);
    CHECK(cl.mu == Rational(2));
}

TEST_CASE("classify_system: the linear focus spirals with unit winding slope") {
    const CylinderSystem sys = synthetic_system(
        [](double r, double) { return -r; }, [](double, double) { return 1.0; }, 0.3,
        1e-9, 64, 220);
    const Classification cl = classify_system(sys);
    CHECK(cl.kind == FlowClass::Spiraling);
    CHECK(cl.winding_slope == doctest::Approx(1.0).epsilon(0.02));

    const SpiralingReport rep = detect_spiraling(sys);
    CHECK(rep.spiraling);
    CHECK(rep.min_turns > 1.25);
}

TEST_CASE("detect_spiraling: gradient-like systems do not spiral") {
    const CylinderSystem saddle = synthetic_system(
        [](double r, double phi) { return 2 * r * r * r * std::cos(2 * phi); },
        [](double r, double phi) { return -2 * r * r * std::sin(2 * phi); }, 0.3, 1e-6,
        64, 128);
    CHECK(!detect_spiraling(saddle).spiraling);
}

TEST_CASE("classify_system: invariant under positive rescaling") {
    for (double scale : {1.0, 7.3}) {
        const CylinderSystem sys = synthetic_system(
            [scale](double r, double phi) {
                return scale * 2 * r * r * r * std::cos(2 * phi);
            },
            [scale](double r, double phi) {
                return scale * -2 * r * r * std::sin(2 * phi);
            },
            0.3, 1e-6, 64, 128);
        const Classification cl = classify_system(sys);
        CHECK(cl.kind == FlowClass::NonMonodromic);
        CHECK(cl.mu == Rational(2));
    }
}

TEST_CASE("oscillation_test: reversal counting with hysteresis") {
    CylinderTrajectory osc, ramp;
    for (int k = 0; k < 400; ++k) {
        const double t = 0.05 * k;
        osc.samples.push_back({t, 0.5 * std::sin(t), 0.1});
        ramp.samples.push_back({t, 0.3 * t + 1e-4 * std::sin(40 * t), 0.1});
    }
    const OscillationReport o = oscillation_test(osc);
    CHECK(o.oscillating);
    CHECK(o.reversals >= 4);
    const OscillationReport r = oscillation_test(ramp);
    CHECK(!r.oscillating);
    CHECK(r.reversals == 0);
}
