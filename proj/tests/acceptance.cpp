// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and uses pinned tolerances.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "singflow/classify.hpp"
#include "singflow/error.hpp"
#include "singflow/pipeline.hpp"

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
    return s;
}

Surface cone_surface() {
    Surface s;
    s.equation = mono(2, 0, 0, 1) + mono(0, 2, 0, 1) - mono(0, 0, 2, 1);
    s.seed = Vec3(0.2, 0, 0.2);
    return s;
}

Surface cusp_surface() {
    Surface s;
    s.equation = mono(2, 0, 0, 1) + mono(0, 2, 0, 1) - mono(0, 0, 5, 1);
    s.seed = Vec3(0.3, 0, 0.45);
    return s;
}

Surface shifted_cusp_surface() {
    // (x - z^2)^2 + y^2 - z^5
    Surface s;
    s.equation = mono(2, 0, 0, 1) - mono(1, 0, 2, 2) + mono(0, 0, 4, 1) +
                 mono(0, 2, 0, 1) - mono(0, 0, 5, 1);
    s.seed = Vec3(0.34, 0, 0.45);
    return s;
}

Scenario make_scenario(const Surface& s, const PolyFunction& f) {
    Scenario sc;
    sc.surface = s;
    sc.function = f;
    return sc;
}

PolyFunction neg_r2() { return mono(2, 0, 0, -1) + mono(0, 2, 0, -1); }
PolyFunction saddle_f() { return mono(2, 0, 0, 1) - mono(0, 2, 0, 1); }
PolyFunction neg_z() { return mono(0, 0, 1, -1); }

struct Gate {
    int failures = 0;

    template <typename F>
    void run(int id, const char* name, F&& body) {
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        std::string detail;
        try {
            detail = body();
            ok = true;
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::printf("criterion %2d (%s): %s (%.1f s)%s%s\n", id, name,
                    ok ? "PASS" : "FAIL", sec, detail.empty() ? "" : " -- ",
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

void require(bool cond, const std::string& msg) {
    if (!cond) throw NumericalError(msg);
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

// ---- criterion helpers ----

// sup distance between the chart trajectory (mapped to ambient through the
// chart) and the ambient trajectory at matched slice values
double dual_path_sup(const Surface& s, const PolyFunction& f) {
    const OpeningBlowup b = make_opening(s);
    const SliceKind kind = b.slice_kind();
    const CylinderChart chart = build_chart(s, b, 0.3, 64, 64, 5e-5);
    const Metric eucl;
    const CylinderSystem sys = transformed_system(chart, s, eucl, f);

    const Vec3 p0 = chart.points[0][0];
    const Trajectory amb = integrate(s, eucl, f, p0, 1, 9e-5, 1e12, kind);
    require(amb.stop_reason == StopReason::ReachedRmin, "ambient run stopped early");
    const CylinderTrajectory cyl =
        chart_integrate(sys, chart.phi_grid[0], chart.r_grid[0], 9e-5, 1e7);
    require(cyl.stop_reason == StopReason::ReachedRmin, "chart run stopped early");

    double sup = 0.0;
    std::size_t cursor = 0;
    for (const auto& smp : cyl.samples) {
        if (smp.r > 0.3 || smp.r < 1e-4) continue;
        while (cursor + 1 < amb.samples.size() &&
               slice_value(kind, amb.samples[cursor + 1].p) > smp.r)
            ++cursor;
        if (cursor + 1 >= amb.samples.size()) break;
        const Vec3& pa = amb.samples[cursor].p;
        const Vec3& pb = amb.samples[cursor + 1].p;
        const double ra = slice_value(kind, pa), rb = slice_value(kind, pb);
        const double u = (smp.r - ra) / (rb - ra);
        const Vec3 ambient = pa + u * (pb - pa);
        const Vec3 via_chart = chart.at(smp.phi_unwound, smp.r);
        sup = std::max(sup, (ambient - via_chart).norm());
    }
    return sup;
}

// worst relative finite-difference error and worst tangency residual of the
// restricted gradient over slice-sampled surface points
std::pair<double, double> gradient_errors(const Surface& s, const Metric& m,
                                          const PolyFunction& f, SliceKind kind) {
    double worst_fd = 0.0, worst_tan = 0.0;
    const std::vector<double> levels = {0.3, 0.21, 0.15, 0.1, 0.07, 0.05, 0.035, 0.025};
    Vec3 hint = project_to_surface(s, s.seed);
    int n_points = 0;
    for (double level : levels) {
        hint = move_to_level(s, kind, hint, level);
        const auto curve = slice_curve(s, kind, level, 128, &hint);
        hint = curve.front();
        for (const Vec3& p : curve) {
            ++n_points;
            const Vec3 grad = restricted_gradient(s, m, f, p);
            const Vec3 n = s.equation.gradient(p).normalized();
            if (grad.norm() > 1e-12)
                worst_tan = std::max(worst_tan, std::abs(n.dot(grad)) / grad.norm());
            // FD of f along two tangent directions on the surface itself
            Vec3 t1 = Vec3(1, 0, 0) - n.x() * n;
            if (t1.norm() < 0.5) t1 = Vec3(0, 1, 0) - n.y() * n;
            t1.normalize();
            const Vec3 t2 = n.cross(t1);
            const double h = 1e-5 * std::max(p.norm(), 1e-3);
            const Mat3 g = m.at(p);
            double scale = 0.0, err = 0.0;
            for (const Vec3& v : {t1, t2}) {
                const double fp = f(project_to_surface(s, p + h * v));
                const double fm = f(project_to_surface(s, p - h * v));
                const double fd = (fp - fm) / (2 * h);
                const double an = grad.dot(g * v);
                scale = std::max(scale, std::abs(an));
                err = std::max(err, std::abs(fd - an));
            }
            if (scale > 1e-9) worst_fd = std::max(worst_fd, err / scale);
        }
    }
    require(n_points >= 1000, "fewer than 1000 sample points");
    return {worst_fd, worst_tan};
}

// worst relative decrease of f along random trajectories of the scenario
double monotonicity_violation(const Surface& s, const PolyFunction& f,
                              SliceKind kind, std::mt19937_64& rng) {
    const Metric eucl;
    std::vector<Vec3> pool;
    Vec3 hint = project_to_surface(s, s.seed);
    for (double level : {0.3, 0.2, 0.12, 0.07, 0.04}) {
        hint = move_to_level(s, kind, hint, level);
        const auto curve = slice_curve(s, kind, level, 64, &hint);
        hint = curve.front();
        pool.insert(pool.end(), curve.begin(), curve.end());
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Trajectory tr = integrate(s, eucl, f, pool[pick(rng)], 1, 1e-3, 50.0, kind);
        double fscale = 0.0;
        for (const auto& smp : tr.samples) fscale = std::max(fscale, std::abs(smp.f_value));
        for (std::size_t i = 0; i + 1 < tr.samples.size(); ++i) {
            const double drop = tr.samples[i].f_value - tr.samples[i + 1].f_value;
            if (drop > 0) worst = std::max(worst, drop / std::max(fscale, 1e-300));
        }
    }
    return worst;
}

// crossing counts of the trajectory azimuth against 8 half-branch azimuths
std::vector<long> crossing_counts(const Trajectory& tr) {
    const std::vector<double> phi = unwound_azimuth(tr);
    std::vector<long> counts(8, 0);
    for (int k = 0; k < 8; ++k) {
        const double theta = kTwoPi * k / 8.0 + kTwoPi / 16.0;
        long c = 0;
        for (std::size_t i = 0; i + 1 < phi.size(); ++i)
            c += std::labs(std::lround(std::floor((phi[i + 1] - theta) / kTwoPi)) -
                           std::lround(std::floor((phi[i] - theta) / kTwoPi)));
        counts[k] = c;
    }
    return counts;
}

}  // namespace

int main() {
    Gate gate;

    gate.run(1, "exponent reproduction", [] {
        const Surface cusp = cusp_surface();
        const Rational nu = estimate_nu(cusp), e = estimate_e(cusp);
        require(nu == Rational(5, 2), "cusp nu = " + nu.str() + ", want 5/2");
        require(e == Rational(5, 2), "cusp e = " + e.str() + ", want 5/2");
        const Surface shifted = shifted_cusp_surface();
        const Rational nu2 = estimate_nu(shifted), e2 = estimate_e(shifted);
        require(nu2 == Rational(2), "shifted cusp nu = " + nu2.str() + ", want 2");
        require(e2 == Rational(2), "shifted cusp e = " + e2.str() + ", want 2");
        return std::string("nu=e=5/2 and nu'=e'=2, exact after snapping");
    });

    gate.run(2, "plane-case classification", [] {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            Scenario dic = make_scenario(plane_surface(), neg_r2());
            dic.options.rng_seed = seed;
            require(analyze(dic).classification.kind == FlowClass::Dicritical,
                    "-(x^2+y^2) not Dicritical with seed " + std::to_string(seed));
            Scenario sad = make_scenario(plane_surface(), saddle_f());
            sad.options.rng_seed = seed;
            require(analyze(sad).classification.kind == FlowClass::NonMonodromic,
                    "x^2-y^2 not NonMonodromic with seed " + std::to_string(seed));
        }
        return std::string("Dicritical / NonMonodromic, stable across 3 seeds");
    });

    gate.run(3, "spiraling detector", [] {
        const CylinderSystem focus = synthetic_system(
            [](double r, double) { return -r; }, [](double, double) { return 1.0; },
            0.3, 1e-9, 64, 220);
        const Classification cl = classify_system(focus);
        require(cl.kind == FlowClass::Spiraling, "focus system not Spiraling");
        require(std::abs(cl.winding_slope - 1.0) < 0.02,
                fmt("focus slope %.4f, want 1 within 2%%", cl.winding_slope));
        // gradient-derived systems from criteria 1-2 must never spiral
        const std::pair<Surface, PolyFunction> cases[] = {
            {plane_surface(), neg_r2()},
            {plane_surface(), saddle_f()},
            {cusp_surface(), neg_z()},
            {shifted_cusp_surface(), neg_z()},
        };
        for (const auto& [s, f] : cases) {
            const AnalyzeResult r = analyze(make_scenario(s, f));
            require(r.classification.kind != FlowClass::Spiraling,
                    "gradient system classified Spiraling");
            require(!r.winding.spiraling, "winding probe reports spiraling");
        }
        return fmt("focus slope %.4f; 4 gradient systems non-spiraling",
                   cl.winding_slope);
    });

    gate.run(4, "dual-path equivalence", [] {
        const double sup_plane = dual_path_sup(plane_surface(), neg_r2());
        const double sup_cone = dual_path_sup(cone_surface(), neg_z());
        const double sup_cusp = dual_path_sup(cusp_surface(), neg_z());
        require(sup_plane < 1e-4, fmt("plane sup %.2e", sup_plane));
        require(sup_cone < 1e-4, fmt("cone sup %.2e", sup_cone));
        require(sup_cusp < 1e-4, fmt("cusp sup %.2e", sup_cusp));
        return fmt("sup distance: plane %.1e, cone %.1e, cusp %.1e", sup_plane,
                   sup_cone, sup_cusp);
    });

    gate.run(5, "gradient correctness", [] {
        Metric stretched = Metric::from_entries(
            {mono(0, 0, 0, 2), PolyFunction(), PolyFunction(), PolyFunction(),
             mono(0, 0, 0, 1) + mono(2, 0, 0, 1), PolyFunction(), PolyFunction(),
             PolyFunction(), mono(0, 0, 0, 1)});
        const std::tuple<Surface, Metric, PolyFunction, SliceKind> cases[] = {
            {plane_surface(), Metric(), neg_r2(), SliceKind::Radial},
            {plane_surface(), stretched, saddle_f(), SliceKind::Radial},
            {cone_surface(), Metric(), neg_z(), SliceKind::Radial},
            {cusp_surface(), Metric(), neg_z(), SliceKind::Height},
        };
        double fd = 0.0, tan = 0.0;
        for (const auto& [s, m, f, kind] : cases) {
            const auto [wfd, wtan] = gradient_errors(s, m, f, kind);
            fd = std::max(fd, wfd);
            tan = std::max(tan, wtan);
        }
        require(fd < 1e-6, fmt("worst FD relative error %.2e", fd));
        require(tan < 1e-9, fmt("worst tangency residual %.2e", tan));
        return fmt("worst FD error %.1e, worst tangency %.1e", fd, tan);
    });

    gate.run(6, "monotonicity along trajectories", [] {
        std::mt19937_64 rng(2026);
        const std::tuple<Surface, PolyFunction, SliceKind> cases[] = {
            {plane_surface(), neg_r2(), SliceKind::Radial},
            {plane_surface(), saddle_f(), SliceKind::Radial},
            {cone_surface(), neg_z(), SliceKind::Radial},
            {cusp_surface(), neg_z(), SliceKind::Height},
            {shifted_cusp_surface(), neg_z(), SliceKind::Height},
        };
        double worst = 0.0;
        for (const auto& [s, f, kind] : cases)
            worst = std::max(worst, monotonicity_violation(s, f, kind, rng));
        require(worst <= 1e-12, fmt("violation %.2e above 1e-12", worst));
        return fmt("500 trajectories, worst relative decrease %.1e", worst);
    });

    gate.run(7, "series round-trip", [] {
        std::mt19937_64 rng(11);
        std::uniform_int_distribution<int> den_d(1, 8), nterms_d(1, 4);
        std::uniform_real_distribution<double> coeff_d(0.2, 3.0);
        std::bernoulli_distribution sign_d;
        for (int trial = 0; trial < 50; ++trial) {
            const int den = den_d(rng), nterms = nterms_d(rng);
            std::uniform_int_distribution<int> num_d(den, 5 * den);
            std::vector<int> nums;
            while (int(nums.size()) < nterms) {
                const int n = num_d(rng);
                bool fresh = true;
                for (int q : nums) fresh = fresh && std::abs(q - n) >= std::max(1, den / 2);
                if (fresh) nums.push_back(n);
            }
            std::sort(nums.begin(), nums.end());
            GenSeries planted;
            for (int n : nums) {
                const double c = (sign_d(rng) ? 1 : -1) * coeff_d(rng);
                planted = add(planted, GenSeries::term(Rational(n, den), c), 1e-300);
            }
            std::vector<std::pair<double, double>> samples;
            for (int i = 0; i <= 64; ++i) {
                const double t = std::pow(10.0, -4.0 + 4.0 * i / 64.0);
                samples.push_back({t, planted.evaluate(t)});
            }
            const SeriesFit fit = fit_series(samples, 6, 8, 1e-9);
            require(fit.series.size() == planted.terms().size(),
                    "term count mismatch in trial " + std::to_string(trial));
            for (std::size_t k = 0; k < planted.terms().size(); ++k) {
                const auto& want = planted.terms()[k];
                const auto& got = fit.series.terms()[k];
                require(got.exponent == want.exponent,
                        "exponent mismatch in trial " + std::to_string(trial));
                require(std::abs(got.coeff - want.coeff) <= 1e-6 * std::abs(want.coeff),
                        "coefficient error in trial " + std::to_string(trial));
            }
        }
        return std::string("50 planted series recovered exactly");
    });

    gate.run(8, "accumulating trajectory", [] {
        const Metric eucl;
        const std::tuple<Surface, PolyFunction, SliceKind> cases[] = {
            {plane_surface(), neg_r2(), SliceKind::Radial},
            {plane_surface(), saddle_f(), SliceKind::Radial},
            {cone_surface(), neg_z(), SliceKind::Radial},
        };
        double deepest = 0.0;
        for (const auto& [s, f, kind] : cases) {
            const Trajectory tr = find_accumulating_trajectory(s, eucl, f, 9e-5, kind);
            const double final_slice = slice_value(kind, tr.samples.back().p);
            require(final_slice < 1e-4, fmt("final slice %.2e", final_slice));
            deepest = std::max(deepest, final_slice);
        }
        return fmt("plane, saddle, cone all below 1e-4 (worst %.1e)", deepest);
    });

    gate.run(9, "pullback metric structure", [] {
        const Metric eucl;
        const std::pair<Surface, PolyFunction> cases[] = {
            {plane_surface(), neg_r2()},
            {plane_surface(), saddle_f()},
            {cone_surface(), neg_z()},
        };
        std::string detail;
        for (const auto& [s, f] : cases) {
            const OpeningBlowup b = make_opening(s);
            require(b.variant == ConeKind::OTC, "expected an OTC scenario");
            const CylinderChart chart = build_chart(s, b, 0.3, 64, 72, 5e-6);
            const MetricFields mf = pullback_metric(chart, eucl);
            double det_min = 1e300;
            for (std::size_t k = 0; k < chart.r_grid.size(); ++k) {
                if (chart.r_grid[k] <= 1e-5) continue;
                for (std::size_t j = 0; j < chart.phi_grid.size(); ++j)
                    det_min = std::min(det_min,
                                       mf.A[k][j] * mf.C[k][j] - mf.B[k][j] * mf.B[k][j]);
            }
            require(det_min > 0, fmt("det min %.2e not positive", det_min));
            for (std::size_t j = 0; j < chart.phi_grid.size(); j += 16) {
                std::vector<double> t, y;
                for (std::size_t k = chart.r_grid.size(); k-- > 0;) {
                    t.push_back(chart.r_grid[k]);
                    y.push_back(mf.C[k][j]);
                }
                const ExponentFit fit = fit_leading_exponent(t, y, 16);
                require(fit.valid && fit.snapped == Rational(2),
                        "C exponent " + (fit.valid ? fit.snapped.str() : "n/a") +
                            ", want 2");
            }
            detail = fmt("det > 0 for r > 1e-5 (min %.1e), C ~ r^2", det_min);
        }
        return std::string("3 OTC scenarios: ") + detail;
    });

    gate.run(10, "oscillation stabilization", [] {
        const Surface s = cusp_surface();
        const Metric eucl;
        const PolyFunction f = neg_z();
        Vec3 hint = project_to_surface(s, s.seed);
        hint = move_to_level(s, SliceKind::Height, hint, 0.3);
        const auto top = slice_curve(s, SliceKind::Height, 0.3, 64, &hint);
        long total = 0;
        for (int q = 0; q < 4; ++q) {
            const Vec3 p0 = top[16 * q + 4];
            std::vector<std::vector<long>> per_rmin;
            for (double r_min : {1e-4, 1e-5, 1e-6}) {
                const Trajectory tr =
                    integrate(s, eucl, f, p0, 1, r_min, 1e12, SliceKind::Height);
                require(tr.stop_reason == StopReason::ReachedRmin,
                        "trajectory stopped before r_min");
                per_rmin.push_back(crossing_counts(tr));
            }
            require(per_rmin[0] == per_rmin[1] && per_rmin[1] == per_rmin[2],
                    "crossing counts changed with r_min");
            for (long c : per_rmin[0]) total += c;
        }
        return fmt("4 starts x 8 half-branches, counts identical (%g total)",
                   double(total));
    });

    if (gate.failures == 0)
        std::printf("acceptance: all 10 criteria PASS\n");
    else
        std::printf("acceptance: %d criteria FAILED\n", gate.failures);
    return gate.failures == 0 ? 0 : 1;
}
