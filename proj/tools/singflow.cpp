#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "singflow/classify.hpp"
#include "singflow/error.hpp"
#include "singflow/pipeline.hpp"
#include "singflow/scenario.hpp"
#include "singflow/svg.hpp"

using namespace singflow;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw NumericalError("cannot write '" + path.string() + "'");
    out << content;
}

const char* class_name(FlowClass k) {
    switch (k) {
        case FlowClass::Dicritical: return "Dicritical";
        case FlowClass::NonMonodromic: return "NonMonodromic";
        case FlowClass::Spiraling: return "Spiraling";
        default: return "Undetermined";
    }
}

// Scenario surface in the coordinates used by the pipeline: rotated so the
// tangent-cone direction is the z-axis in the CTC case.
struct AdaptedScenario {
    Surface surface;
    Metric metric;
    PolyFunction function;
    SliceKind kind = SliceKind::Radial;
};

AdaptedScenario adapt(const Scenario& sc) {
    AdaptedScenario a{sc.surface, sc.metric, sc.function, SliceKind::Radial};
    const TangentConeReport cone = classify_tangent_cone(sc.surface, sc.options.ctc);
    if (cone.kind == ConeKind::CTC) {
        const Mat3 R = adapted_rotation(cone.direction);
        const Mat3 Rt = R.transpose();
        a.surface = rotate_surface(sc.surface, R);
        a.metric = sc.metric.compose_linear(Rt);
        a.function = sc.function.compose_linear(Rt);
        a.kind = SliceKind::Height;
    }
    return a;
}

std::vector<SvgSeries> portrait_series(const CylinderSystem& sys) {
    static const char* colors[] = {"#1f6fb2", "#b23a1f", "#2a9d4e", "#7a4fb2"};
    std::vector<SvgSeries> series;
    const double r0 = sys.r_grid.front() * 0.8;
    const double r_stop = sys.r_grid.back() * 3.0;
    for (int q = 0; q < 4; ++q) {
        const double phi = kTwoPi * q / 4.0;
        SvgSeries s;
        s.color = colors[q];
        try {
            const CylinderTrajectory tr = chart_integrate(sys, phi, r0, r_stop, 1e6);
            for (const auto& smp : tr.samples)
                s.points.push_back({std::log10(smp.r), smp.phi_unwound});
        } catch (const Error&) {
            continue;  // a probe failing to integrate is not fatal for a plot
        }
        series.push_back(std::move(s));
    }
    return series;
}

int cmd_analyze(const std::string& scenario_path, const std::string& out_dir,
                bool plot_only) {
    const Scenario sc = load_scenario(scenario_path);
    const AnalyzeResult r = analyze(sc);
    const std::filesystem::path out(out_dir);
    write_file(out / "portrait.svg",
               svg_plot(portrait_series(r.system), "log10 r", "phi unwound",
                        "phase portrait"));
    if (!plot_only) {
        const std::string report = analyze_report(sc, r);
        write_file(out / "report.txt", report);
        write_file(out / "chart.csv", chart_csv(r.chart));
        std::cout << report;
    }
    return r.classification.kind == FlowClass::Undetermined ? 4 : 0;
}

int cmd_trace(const std::string& scenario_path, const std::string& out_dir,
              std::vector<double> start, int direction, double r_min_flag) {
    const Scenario sc = load_scenario(scenario_path);
    const AdaptedScenario a = adapt(sc);
    const double r_min = r_min_flag > 0 ? r_min_flag : sc.options.r_min;
    Vec3 p0(start[0], start[1], start[2]);
    const Vec3 proj = project_to_surface(a.surface, p0);
    if ((proj - p0).norm() > 0.05 * std::max(p0.norm(), 1e-3))
        throw PreconditionError("trace: start point is too far from the surface");

    const Trajectory tr =
        integrate(a.surface, a.metric, a.function, proj, direction, r_min, 1e12, a.kind);
    const std::vector<double> phi = unwound_azimuth(tr);

    CylinderTrajectory cyl;
    for (std::size_t i = 0; i < tr.samples.size(); ++i)
        cyl.samples.push_back(
            {tr.samples[i].t, phi[i], slice_value(a.kind, tr.samples[i].p)});
    cyl.stop_reason = tr.stop_reason;

    const OscillationReport osc = oscillation_test(cyl);
    std::ostringstream summary;
    const char* stops[] = {"reached r_min", "left domain", "step failure", "max time"};
    summary << "trace summary\n"
            << "samples=" << tr.samples.size() << " stop="
            << stops[static_cast<int>(tr.stop_reason)] << "\n"
            << "winding_turns=" << (phi.back() - phi.front()) / kTwoPi
            << " reversals=" << osc.reversals << " oscillating="
            << (osc.oscillating ? "true" : "false") << "\n";

    const std::filesystem::path out(out_dir);
    write_file(out / "trajectory.csv", trajectory_csv(tr));
    write_file(out / "cylinder.csv", cylinder_csv(cyl));
    write_file(out / "trace_summary.txt", summary.str());
    SvgSeries s;
    for (const auto& smp : cyl.samples)
        s.points.push_back({std::log10(std::max(smp.r, 1e-300)), smp.phi_unwound});
    write_file(out / "trajectory.svg",
               svg_plot({s}, "log10 r", "phi unwound", "trace"));
    std::cout << summary.str();
    return 0;
}

int cmd_separatrix(const std::string& scenario_path, const std::string& out_dir,
                   double r_min_flag) {
    const Scenario sc = load_scenario(scenario_path);
    const AdaptedScenario a = adapt(sc);
    const double r_min = r_min_flag > 0 ? r_min_flag : sc.options.r_min;
    const Trajectory tr =
        find_accumulating_trajectory(a.surface, a.metric, a.function, r_min, a.kind);
    const SeparatrixExpansion se = separatrix_expansion(tr);

    std::ostringstream rep;
    rep << "separatrix expansion (parameter: slice value)\n";
    const char* names[] = {"x", "y", "z"};
    for (int c = 0; c < 3; ++c)
        rep << names[c] << "(s) = " << se.gamma[c].str()
            << "  residual=" << se.residuals[c] << "\n";
    rep << "quality_ok=" << (se.quality_ok ? "true" : "false") << "\n";

    const std::filesystem::path out(out_dir);
    write_file(out / "separatrix.csv", trajectory_csv(tr));
    write_file(out / "expansion.txt", rep.str());
    std::cout << rep.str();
    return 0;
}

// Synthetic cylinder system from JSON, for direct classification tests:
// fields r_hi, r_lo, n_phi, n_r and term lists rdot/phidot where each term is
// {coeff, r_exp, harmonic, phase: "cos"|"sin"}.
int cmd_classify(const std::string& system_path) {
    std::ifstream in(system_path);
    if (!in) throw PreconditionError("classify: cannot open '" + system_path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw PreconditionError(std::string("classify: not valid JSON: ") + e.what());
    }
    const auto field = [&](const char* key) -> nlohmann::json {
        if (!j.contains(key))
            throw PreconditionError(std::string("classify: field '") + key +
                                    "' is missing");
        return j[key];
    };
    const double r_hi = field("r_hi").get<double>();
    const double r_lo = field("r_lo").get<double>();
    const int n_phi = field("n_phi").get<int>();
    const int n_r = field("n_r").get<int>();

    struct Term {
        double coeff, r_exp;
        int harmonic;
        bool sine;
    };
    const auto parse_terms = [&](const char* key) {
        std::vector<Term> terms;
        for (const auto& t : field(key)) {
            Term term{};
            term.coeff = t.at("coeff").get<double>();
            term.r_exp = t.at("r_exp").get<double>();
            term.harmonic = t.value("harmonic", 0);
            term.sine = t.value("phase", std::string("cos")) == "sin";
            terms.push_back(term);
        }
        return terms;
    };
    const auto evaluate = [](const std::vector<Term>& terms, double r, double phi) {
        double v = 0.0;
        for (const auto& t : terms)
            v += t.coeff * std::pow(r, t.r_exp) *
                 (t.sine ? std::sin(t.harmonic * phi) : std::cos(t.harmonic * phi));
        return v;
    };
    const auto rdot_terms = parse_terms("rdot");
    const auto phidot_terms = parse_terms("phidot");
    const CylinderSystem sys = synthetic_system(
        [&](double r, double phi) { return evaluate(rdot_terms, r, phi); },
        [&](double r, double phi) { return evaluate(phidot_terms, r, phi); }, r_hi,
        r_lo, n_phi, n_r);
    const Classification cl = classify_system(sys);
    std::cout << "verdict=" << class_name(cl.kind) << " mu=" << cl.mu.str()
              << " eta=" << cl.eta.str() << " winding_slope=" << cl.winding_slope
              << "\n  evidence: " << cl.evidence << "\n";
    return cl.kind == FlowClass::Undetermined ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"restricted gradient flows on implicit surfaces"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = ".", system_path;
    std::vector<double> start;
    int direction = 1;
    double r_min = -1.0;
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "override the scenario rng seed");

    auto* analyze_cmd = app.add_subcommand("analyze", "full pipeline + report");
    analyze_cmd->add_option("--scenario", scenario_path, "scenario JSON")->required();
    analyze_cmd->add_option("--out", out_dir, "output directory");

    auto* trace_cmd = app.add_subcommand("trace", "integrate one trajectory");
    trace_cmd->add_option("--scenario", scenario_path, "scenario JSON")->required();
    trace_cmd->add_option("--start", start, "start point x y z")
        ->expected(3)
        ->required();
    trace_cmd->add_option("--direction", direction, "+1 ascends f, -1 descends");
    trace_cmd->add_option("--r-min", r_min, "stop slice value");
    trace_cmd->add_option("--out", out_dir, "output directory");

    auto* sep_cmd = app.add_subcommand("separatrix", "accumulating trajectory");
    sep_cmd->add_option("--scenario", scenario_path, "scenario JSON")->required();
    sep_cmd->add_option("--r-min", r_min, "target slice value");
    sep_cmd->add_option("--out", out_dir, "output directory");

    auto* classify_cmd = app.add_subcommand("classify", "classify a synthetic system");
    classify_cmd->add_option("--system", system_path, "system JSON")->required();

    auto* plot_cmd = app.add_subcommand("plot", "phase portrait only");
    plot_cmd->add_option("--scenario", scenario_path, "scenario JSON")->required();
    plot_cmd->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (analyze_cmd->parsed()) return cmd_analyze(scenario_path, out_dir, false);
        if (plot_cmd->parsed()) return cmd_analyze(scenario_path, out_dir, true);
        if (trace_cmd->parsed())
            return cmd_trace(scenario_path, out_dir, start, direction, r_min);
        if (sep_cmd->parsed()) return cmd_separatrix(scenario_path, out_dir, r_min);
        if (classify_cmd->parsed()) return cmd_classify(system_path);
    } catch (const PreconditionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
