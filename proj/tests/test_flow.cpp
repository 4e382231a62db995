#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "singflow/blowup.hpp"
#include "singflow/error.hpp"
#include "singflow/flow.hpp"

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

Surface cusp_surface() {
    Surface s;
    s.equation = mono(2, 0, 0, 1) + mono(0, 2, 0, 1) - mono(0, 0, 5, 1);
    s.seed = Vec3(0.3, 0, 0.45);
    s.epsilon0 = 0.5;
    return s;
}

PolyFunction neg_r2() { return mono(2, 0, 0, -1) + mono(0, 2, 0, -1); }
PolyFunction saddle_f() { return mono(2, 0, 0, 1) + mono(0, 2, 0, -1); }

}  // namespace

TEST_CASE("integrate: radial descent on the plane matches the exact flow") {
    const Surface s = plane_surface();
    const Metric m;
    const Trajectory tr = integrate(s, m, neg_r2(), Vec3(0.2, 0, 0), 1, 1e-3, 1e9);
    CHECK(tr.stop_reason == StopReason::ReachedRmin);
    CHECK(tr.samples.size() > 10);
    for (const auto& smp : tr.samples) {
        const double expect = 0.2 * std::exp(-2.0 * smp.t);
        CHECK(std::abs(smp.p.norm() - expect) < 1e-8 * expect);
        CHECK(std::abs(smp.p.y()) < 1e-12);
        CHECK(std::abs(smp.p.z()) < 1e-12);
    }
    for (std::size_t i = 1; i < tr.samples.size(); ++i)
        CHECK(tr.samples[i].f_value > tr.samples[i - 1].f_value - 1e-15);
    CHECK(tr.samples.back().p.norm() < 1e-3);
}

TEST_CASE("integrate: direction -1 descends f") {
    const Surface s = plane_surface();
    const Metric m;
    const PolyFunction f = mono(2, 0, 0, 1) + mono(0, 2, 0, 1);
    const Trajectory tr = integrate(s, m, f, Vec3(0.2, 0, 0), -1, 1e-3, 1e9);
    CHECK(tr.stop_reason == StopReason::ReachedRmin);
    for (std::size_t i = 1; i < tr.samples.size(); ++i)
        CHECK(tr.samples[i].f_value < tr.samples[i - 1].f_value + 1e-15);
}

TEST_CASE("integrate: stop reasons") {
    const Surface s = plane_surface();
    const Metric m;
    SUBCASE("max time") {
        const Trajectory tr = integrate(s, m, neg_r2(), Vec3(0.2, 0, 0), 1, 1e-6, 0.5);
        CHECK(tr.stop_reason == StopReason::MaxTime);
        CHECK(tr.samples.back().t == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("left domain") {
        const PolyFunction f = mono(2, 0, 0, 1) + mono(0, 2, 0, 1);
        const Trajectory tr = integrate(s, m, f, Vec3(0.2, 0, 0), 1, 1e-6, 1e9);
        CHECK(tr.stop_reason == StopReason::LeftDomain);
        CHECK(tr.samples.back().p.norm() > 0.5);
    }
    SUBCASE("bad arguments throw") {
        CHECK_THROWS_AS(integrate(s, m, neg_r2(), Vec3(0.2, 0, 0), 0, 1e-3, 1.0),
                        PreconditionError);
        CHECK_THROWS_AS(integrate(s, m, neg_r2(), Vec3(0.2, 0, 0), 1, -1.0, 1.0),
                        PreconditionError);
    }
}

TEST_CASE("integrate: meridian descent on the cone is linear in t") {
    const Surface s = cone_surface();
    const Metric m;
    const PolyFunction f = mono(0, 0, 1, -1);  // -z
    const Vec3 p0(0.3, 0, 0.3);
    const Trajectory tr = integrate(s, m, f, p0, 1, 1e-3, 1e9);
    CHECK(tr.stop_reason == StopReason::ReachedRmin);
    for (const auto& smp : tr.samples) {
        const double z = 0.3 - 0.5 * smp.t;
        CHECK(std::abs(smp.p.z() - z) < 1e-9);
        CHECK(std::abs(smp.p.x() - z) < 1e-9);
        CHECK(std::abs(smp.p.y()) < 1e-12);
    }
}

TEST_CASE("integrate: tangency, monotonicity and the energy identity on the cusp") {
    const Surface s = cusp_surface();
    const Metric m;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> coeff(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        PolyFunction f;
        for (int px = 0; px <= 2; ++px)
            for (int py = 0; py + px <= 2; ++py)
                for (int pz = 0; pz + py + px <= 2; ++pz)
                    if (px + py + pz > 0) f = f + mono(px, py, pz, coeff(rng));
        const Vec3 start = move_to_level(s, SliceKind::Radial,
                                         project_to_surface(s, s.seed), 0.3);
        const Trajectory tr = integrate(s, m, f, start, 1, 1e-3, 50.0);
        REQUIRE(tr.samples.size() > 3);
        for (const auto& smp : tr.samples) {
            // stays on the surface and the velocity is tangent
            CHECK(std::abs(s.equation(smp.p)) < 1e-9 * s.equation.term_scale(smp.p));
            const Vec3 n = s.equation.gradient(smp.p);
            CHECK(std::abs(smp.v.dot(n)) <= 1e-9 * smp.v.norm() * n.norm() + 1e-300);
        }
        for (std::size_t i = 1; i < tr.samples.size(); ++i) {
            const auto& a = tr.samples[i - 1];
            const auto& b = tr.samples[i];
            CHECK(b.f_value >= a.f_value - 1e-12);
            // d(f o gamma)/dt = |grad(f|S)|^2: trapezoid consistency check
            const double lhs = b.f_value - a.f_value;
            const double rhs = 0.5 * (b.t - a.t) * (a.v.squaredNorm() + b.v.squaredNorm());
            if (std::abs(lhs) > 1e-10 * std::abs(a.f_value))
                CHECK(std::abs(lhs - rhs) < 5e-2 * std::abs(lhs) + 1e-14);
        }
    }
}

TEST_CASE("pullback_metric: polar form on the plane") {
    const Surface s = plane_surface();
    const OpeningBlowup b = make_opening(s);
    const CylinderChart chart = build_chart(s, b, 0.3, 64, 64, 1e-3);
    const MetricFields mf = pullback_metric(chart, Metric());
    for (std::size_t k = 0; k < chart.r_grid.size(); ++k) {
        const double r = chart.r_grid[k];
        for (std::size_t j = 0; j < chart.phi_grid.size(); ++j) {
            CHECK(std::abs(mf.A[k][j] - 1.0) < 2e-3);
            CHECK(std::abs(mf.B[k][j]) < 2e-3 * r);
            CHECK(std::abs(mf.C[k][j] - r * r) < 2e-3 * r * r);
            CHECK(mf.A[k][j] * mf.C[k][j] - mf.B[k][j] * mf.B[k][j] > 0);
        }
    }
}

TEST_CASE("pullback_metric: the cone halves the angular coefficient") {
    const Surface s = cone_surface();
    const OpeningBlowup b = make_opening(s);
    const CylinderChart chart = build_chart(s, b, 0.3, 64, 64, 1e-3);
    const MetricFields mf = pullback_metric(chart, Metric());
    for (std::size_t k = 0; k < chart.r_grid.size(); ++k) {
        const double r = chart.r_grid[k];
        for (std::size_t j = 0; j < chart.phi_grid.size(); ++j) {
            CHECK(std::abs(mf.A[k][j] - 1.0) < 2e-3);
            CHECK(std::abs(mf.B[k][j]) < 2e-3 * r);
            CHECK(std::abs(mf.C[k][j] - 0.5 * r * r) < 2e-3 * r * r);
        }
    }
}

TEST_CASE("transformed_system: rotationally symmetric descent on the plane") {
    const Surface s = plane_surface();
    const OpeningBlowup b = make_opening(s);
    const CylinderChart chart = build_chart(s, b, 0.3, 64, 64, 1e-3);
    const CylinderSystem sys = transformed_system(chart, s, Metric(), neg_r2());
    for (std::size_t k = 0; k < sys.r_grid.size(); ++k) {
        const double r = sys.r_grid[k];
        for (std::size_t j = 0; j < sys.phi_grid.size(); ++j) {
            CHECK(std::abs(sys.rdot[k][j] + 2.0 * r * r * r) < 5e-3 * 2.0 * r * r * r);
            CHECK(std::abs(sys.phidot[k][j]) < 1e-3 * 2.0 * r * r * r);
        }
    }
    for (const auto& fit : sys.rdot_exponents) {
        REQUIRE(fit.valid);
        CHECK(fit.snapped == Rational(3));
    }
}

TEST_CASE("transformed_system: saddle profile on the plane") {
    const Surface s = plane_surface();
    const OpeningBlowup b = make_opening(s);
    const CylinderChart chart = build_chart(s, b, 0.3, 128, 64, 1e-3);
    const CylinderSystem sys = transformed_system(chart, s, Metric(), saddle_f());
    // account for the arbitrary base angle and orientation of the chart
    const double alpha0 = std::atan2(chart.points[0][0].y(), chart.points[0][0].x());
    const double alpha1 = std::atan2(chart.points[0][1].y(), chart.points[0][1].x());
    double d = std::fmod(alpha1 - alpha0, kTwoPi);
    if (d > 0.5 * kTwoPi) d -= kTwoPi;
    if (d < -0.5 * kTwoPi) d += kTwoPi;
    const double sigma = d > 0 ? 1.0 : -1.0;
    for (std::size_t k = 0; k < sys.r_grid.size(); ++k) {
        const double r = sys.r_grid[k];
        for (std::size_t j = 0; j < sys.phi_grid.size(); ++j) {
            const double alpha = sigma * sys.phi_grid[j] + alpha0;
            const double er = 2.0 * r * r * r * std::cos(2 * alpha);
            const double ep = sigma * (-2.0 * r * r * std::sin(2 * alpha));
            CHECK(std::abs(sys.rdot[k][j] - er) < 5e-3 * 2.0 * r * r * r);
            CHECK(std::abs(sys.phidot[k][j] - ep) < 5e-3 * 2.0 * r * r);
        }
    }
}

TEST_CASE("chart_integrate: synthetic focus winds like -log r") {
    const CylinderSystem sys = synthetic_system(
        [](double r, double) { return -r; }, [](double, double) { return 1.0; }, 0.3,
        1e-6, 64, 128);
    const CylinderTrajectory tr = chart_integrate(sys, 0.0, 0.25, 1e-5);
    REQUIRE(tr.stop_reason == StopReason::ReachedRmin);
    const auto& a = tr.samples.front();
    const auto& b = tr.samples.back();
    const double slope = (b.phi_unwound - a.phi_unwound) / (std::log(a.r) - std::log(b.r));
    CHECK(std::abs(slope - 1.0) < 5e-3);
}

TEST_CASE("chart_integrate: dual path agrees with the ambient flow on the plane") {
    const Surface s = plane_surface();
    const Metric m;
    const OpeningBlowup b = make_opening(s);
    const CylinderChart chart = build_chart(s, b, 0.3, 64, 64, 1e-3);
    const CylinderSystem sys = transformed_system(chart, s, m, neg_r2());

    const Vec3 p0(0.2, 0.1, 0.0);
    const Trajectory amb = integrate(s, m, neg_r2(), p0, 1, 2e-3, 1e9);
    REQUIRE(amb.stop_reason == StopReason::ReachedRmin);
    const double phi0 = chart.locate_phi(project_to_surface(s, p0));
    const CylinderTrajectory ct = chart_integrate(sys, phi0, p0.norm(), 2e-3);
    REQUIRE(ct.stop_reason == StopReason::ReachedRmin);

    // compare the two curves at matched radii
    std::size_t ia = 0;
    for (const auto& cs : ct.samples) {
        if (cs.r > amb.samples.front().p.norm()) continue;
        while (ia + 1 < amb.samples.size() && amb.samples[ia + 1].p.norm() > cs.r) ++ia;
        if (ia + 1 >= amb.samples.size()) break;
        // interpolate the ambient trajectory at radius cs.r
        const Vec3& pa = amb.samples[ia].p;
        const Vec3& pb = amb.samples[ia + 1].p;
        const double ra = pa.norm(), rb = pb.norm();
        const double u = (ra - cs.r) / (ra - rb);
        const Vec3 p_amb = ((1 - u) * pa + u * pb).normalized() * cs.r;
        const Vec3 p_chart = chart.at(cs.phi_unwound, cs.r);
        CHECK((p_amb - p_chart).norm() < 1e-4);
    }
}

TEST_CASE("find_accumulating_trajectory: monotone cases") {
    const Metric m;
    SUBCASE("plane, negative definite f") {
        const Trajectory tr = find_accumulating_trajectory(plane_surface(), m, neg_r2());
        CHECK(tr.stop_reason == StopReason::ReachedRmin);
        CHECK(slice_value(tr.slice_kind, tr.samples.back().p) < 1e-4);
    }
    SUBCASE("cone, f = -z") {
        const Trajectory tr =
            find_accumulating_trajectory(cone_surface(), m, mono(0, 0, 1, -1));
        CHECK(tr.stop_reason == StopReason::ReachedRmin);
        CHECK(slice_value(tr.slice_kind, tr.samples.back().p) < 1e-4);
    }
}

TEST_CASE("find_accumulating_trajectory: saddle needs the -f^2 reduction") {
    const Metric m;
    const Trajectory tr = find_accumulating_trajectory(plane_surface(), m, saddle_f());
    CHECK(tr.stop_reason == StopReason::ReachedRmin);
    const Vec3 p = tr.samples.back().p;
    CHECK(p.norm() < 1e-4);
    // the separatrix of -(x^2-y^2)^2 on the plane is a coordinate axis
    CHECK(std::min(std::abs(p.x()), std::abs(p.y())) < 0.1 * p.norm());
}

TEST_CASE("separatrix_expansion: radial line on the plane") {
    const Surface s = plane_surface();
    const Metric m;
    const Trajectory tr = integrate(s, m, neg_r2(), Vec3(0.2, 0, 0), 1, 1e-4, 1e9);
    REQUIRE(tr.stop_reason == StopReason::ReachedRmin);
    const SeparatrixExpansion se = separatrix_expansion(tr);
    CHECK(se.quality_ok);
    REQUIRE(!se.gamma[0].is_zero());
    CHECK(se.gamma[0].leading().exponent == Rational(1));
    CHECK(se.gamma[0].leading().coeff == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(se.gamma[1].is_zero());
    CHECK(se.gamma[2].is_zero());
    CHECK(se.gamma[0].evaluate(0.01) == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("separatrix_expansion: too-shallow trajectories are rejected") {
    const Surface s = plane_surface();
    const Metric m;
    const Trajectory tr = integrate(s, m, neg_r2(), Vec3(0.2, 0, 0), 1, 0.05, 1e9);
    CHECK_THROWS_AS(separatrix_expansion(tr), PreconditionError);
}
