#include "singflow/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "singflow/error.hpp"

namespace singflow {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        throw NumericalError(std::string("stage ") + name + ": " + e.what());
    }
}

bool flagged(double phi, const std::vector<std::pair<double, double>>& flags) {
    for (const auto& [a, b] : flags) {
        if (a <= b ? (phi >= a && phi <= b) : (phi >= a || phi <= b)) return true;
    }
    return false;
}

const char* class_name(FlowClass k) {
    switch (k) {
        case FlowClass::Dicritical: return "Dicritical";
        case FlowClass::NonMonodromic: return "NonMonodromic";
        case FlowClass::Spiraling: return "Spiraling";
        default: return "Undetermined";
    }
}

}  // namespace

AnalyzeResult analyze(const Scenario& sc) {
    const ScenarioOptions& opt = sc.options;
    AnalyzeResult r;
    stage("surface", [&] { validate_surface(sc.surface); return 0; });
    r.cone = stage("tangent-cone",
                   [&] { return classify_tangent_cone(sc.surface, opt.ctc); });

    r.adapted = sc.surface;
    r.adapted_metric = sc.metric;
    r.adapted_function = sc.function;
    if (r.cone.kind == ConeKind::CTC) {
        const Mat3 R = adapted_rotation(r.cone.direction);
        r.adapted = rotate_surface(sc.surface, R);
        const Mat3 Rt = R.transpose();
        r.adapted_metric = sc.metric.compose_linear(Rt);
        r.adapted_function = sc.function.compose_linear(Rt);
        stage("exponents", [&] {
            r.nu = estimate_nu(r.adapted);
            r.e = estimate_e(r.adapted);
            r.exponents_valid = true;
            return 0;
        });
    }

    r.opening = stage("blow-up", [&] { return make_opening(r.adapted); });

    const double epsilon = 0.6 * opt.epsilon0;
    const double chart_r_min = std::min(opt.r_min, epsilon / 1100.0);
    const double decades = std::log10(epsilon / chart_r_min);
    const int n_r = std::max(opt.n_r, static_cast<int>(std::ceil(14.0 * decades)) + 2);
    r.chart = stage("chart", [&] {
        return build_chart(r.adapted, r.opening, epsilon, opt.n_phi, n_r, chart_r_min);
    });
    r.system = stage("pullback", [&] {
        return transformed_system(r.chart, r.adapted, r.adapted_metric,
                                  r.adapted_function);
    });
    r.expansion = stage("expansion", [&] {
        return asymptotic_expansion(r.chart, r.adapted_function, opt.max_strips,
                                    opt.constancy);
    });
    r.classification = stage("classification", [&] {
        return classify_system(r.system, opt.spiral_turns);
    });
    r.winding = detect_spiraling(r.system, opt.spiral_turns);
    return r;
}

std::string analyze_report(const Scenario& sc, const AnalyzeResult& r) {
    const ScenarioOptions& opt = sc.options;
    std::ostringstream out;
    out << "singflow analyze report\n";
    out << "stage tangent-cone: kind="
        << (r.cone.kind == ConeKind::OTC ? "OTC" : "CTC")
        << " secant_spread=" << fmt(r.cone.secant_spread) << " threshold="
        << fmt(opt.ctc);
    if (r.cone.kind == ConeKind::CTC)
        out << " direction=(" << fmt(r.cone.direction.x()) << ", "
            << fmt(r.cone.direction.y()) << ", " << fmt(r.cone.direction.z()) << ")";
    out << "\n";
    if (r.exponents_valid)
        out << "stage exponents: nu = " << r.nu.str() << ", e = " << r.e.str() << "\n";
    else
        out << "stage exponents: not applicable (tangent cone is not a half-line)\n";
    out << "stage blow-up: variant="
        << (r.opening.variant == ConeKind::OTC ? "OTC" : "CTC");
    if (r.opening.variant == ConeKind::CTC) {
        out << " N=" << r.opening.N << " m=" << r.opening.m << " opening_e="
            << r.opening.e.str() << " theta1=" << r.opening.theta[0].str()
            << " theta2=" << r.opening.theta[1].str();
    }
    out << "\n";
    out << "stage chart: epsilon=" << fmt(r.chart.epsilon) << " n_phi="
        << r.chart.phi_grid.size() << " n_r=" << r.chart.r_grid.size() << " r_min="
        << fmt(r.chart.r_grid.back()) << " slice="
        << (r.chart.kind == SliceKind::Radial ? "radial" : "height")
        << " omega_intervals=" << r.chart.omega_flags.size() << "\n";

    // pullback summary: positivity margin and the fitted growth of C
    double det_min = 1e300;
    for (std::size_t k = 0; k < r.system.r_grid.size(); ++k)
        for (std::size_t j = 0; j < r.system.phi_grid.size(); ++j) {
            const double A = r.system.metric.A[k][j], B = r.system.metric.B[k][j],
                         C = r.system.metric.C[k][j];
            det_min = std::min(det_min, A * C - B * B);
        }
    std::vector<double> t, y;
    for (std::size_t k = r.system.r_grid.size(); k-- > 0;) {
        t.push_back(r.system.r_grid[k]);
        y.push_back(r.system.metric.C[k][0]);
    }
    const ExponentFit cfit = fit_leading_exponent(t, y, opt.denominator_cap);
    out << "stage pullback: det_min=" << fmt(det_min) << " C_leading_exponent="
        << (cfit.valid ? cfit.snapped.str() : "n/a") << "\n";

    out << "stage expansion: pure=" << (r.expansion.pure ? "true" : "false");
    for (const auto& strip : r.expansion.strips) {
        out << " [alpha=" << strip.alpha.str()
            << (strip.constant ? " constant mean=" : " angular mean=")
            << fmt(strip.mean) << "]";
    }
    if (!r.expansion.pure_series.is_zero())
        out << " pure_series=" << r.expansion.pure_series.str();
    out << "\n";

    out << "stage classification: verdict=" << class_name(r.classification.kind);
    if (r.classification.kind == FlowClass::Dicritical)
        out << " mu=" << r.classification.mu.str() << " eta="
            << r.classification.eta.str();
    if (r.classification.kind == FlowClass::NonMonodromic)
        out << " mu=" << r.classification.mu.str();
    if (r.classification.kind == FlowClass::Spiraling)
        out << " winding_slope=" << fmt(r.classification.winding_slope);
    out << "\n  evidence: " << r.classification.evidence << "\n";
    out << "winding: spiraling=" << (r.winding.spiraling ? "true" : "false")
        << " min_turns=" << fmt(r.winding.min_turns) << " slope="
        << fmt(r.winding.winding_slope) << "\n";
    out << "parameters: epsilon0=" << fmt(opt.epsilon0) << " r_min=" << fmt(opt.r_min)
        << " n_phi=" << opt.n_phi << " n_r=" << opt.n_r << " denominator_cap="
        << opt.denominator_cap << " max_strips=" << opt.max_strips << " constancy="
        << fmt(opt.constancy) << " ctc=" << fmt(opt.ctc) << " spiral_turns="
        << fmt(opt.spiral_turns) << " rng_seed=" << opt.rng_seed << "\n";
    return out.str();
}

std::vector<double> unwound_azimuth(const Trajectory& tr) {
    std::vector<double> phi;
    phi.reserve(tr.samples.size());
    double prev = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        const Vec3& p = tr.samples[i].p;
        const double a = std::atan2(p.y(), p.x());
        if (i == 0) {
            acc = a;
        } else {
            double d = std::fmod(a - prev, kTwoPi);
            if (d > 0.5 * kTwoPi) d -= kTwoPi;
            if (d < -0.5 * kTwoPi) d += kTwoPi;
            acc += d;
        }
        prev = a;
        phi.push_back(acc);
    }
    return phi;
}

std::string trajectory_csv(const Trajectory& tr) {
    std::ostringstream out;
    out << "t,x,y,z,r,phi_unwound,f\n";
    const std::vector<double> phi = unwound_azimuth(tr);
    for (std::size_t i = 0; i < tr.samples.size(); ++i) {
        const auto& s = tr.samples[i];
        out << fmt(s.t) << "," << fmt(s.p.x()) << "," << fmt(s.p.y()) << ","
            << fmt(s.p.z()) << "," << fmt(slice_value(tr.slice_kind, s.p)) << ","
            << fmt(phi[i]) << "," << fmt(s.f_value) << "\n";
    }
    return out.str();
}

std::string cylinder_csv(const CylinderTrajectory& tr) {
    std::ostringstream out;
    out << "t,phi_unwound,r\n";
    for (const auto& s : tr.samples)
        out << fmt(s.t) << "," << fmt(s.phi_unwound) << "," << fmt(s.r) << "\n";
    return out.str();
}

std::string chart_csv(const CylinderChart& chart) {
    std::ostringstream out;
    out << "phi,r,x,y,z,omega_flag\n";
    for (std::size_t k = 0; k < chart.r_grid.size(); ++k)
        for (std::size_t j = 0; j < chart.phi_grid.size(); ++j) {
            const Vec3& p = chart.points[k][j];
            out << fmt(chart.phi_grid[j]) << "," << fmt(chart.r_grid[k]) << ","
                << fmt(p.x()) << "," << fmt(p.y()) << "," << fmt(p.z()) << ","
                << (flagged(chart.phi_grid[j], chart.omega_flags) ? 1 : 0) << "\n";
        }
    return out.str();
}

}  // namespace singflow
