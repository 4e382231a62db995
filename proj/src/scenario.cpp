#include "singflow/scenario.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "singflow/error.hpp"

namespace singflow {
namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw PreconditionError("scenario: field '" + field + "' " + why);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) bad_field(path, "must be an object");
    auto it = j.find(key);
    if (it == j.end()) bad_field(path + "." + key, "is missing");
    return *it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) bad_field(path, "must be a number");
    return j.get<double>();
}

std::int64_t as_integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad_field(path, "must be an integer");
    return j.get<std::int64_t>();
}

PolyFunction parse_poly(const json& j, const std::string& path) {
    if (!j.is_array()) bad_field(path, "must be an array of terms");
    PolyFunction p;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string tp = path + "[" + std::to_string(i) + "]";
        const json& term = j[i];
        const json& powers = require(term, "powers", tp);
        if (!powers.is_array() || powers.size() != 3)
            bad_field(tp + ".powers", "must be an array of 3 integers");
        int pw[3];
        for (int a = 0; a < 3; ++a) {
            const std::int64_t v = as_integer(powers[a], tp + ".powers");
            if (v < 0 || v > 40) bad_field(tp + ".powers", "entries must be in [0, 40]");
            pw[a] = static_cast<int>(v);
        }
        const double c = as_number(require(term, "coeff", tp), tp + ".coeff");
        p = p + PolyFunction::monomial(pw[0], pw[1], pw[2], c);
    }
    return p;
}

Vec3 parse_vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) bad_field(path, "must be an array of 3 numbers");
    return Vec3(as_number(j[0], path), as_number(j[1], path), as_number(j[2], path));
}

void parse_options(const json& j, ScenarioOptions& opt) {
    static const char* known[] = {"epsilon0", "r_min",      "n_phi",    "n_r",
                                  "denominator_cap", "max_strips", "rng_seed", "thresholds"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) bad_field("options." + it.key(), "is not a known option");
    }
    if (j.contains("epsilon0")) opt.epsilon0 = as_number(j["epsilon0"], "options.epsilon0");
    if (j.contains("r_min")) opt.r_min = as_number(j["r_min"], "options.r_min");
    if (j.contains("n_phi"))
        opt.n_phi = static_cast<int>(as_integer(j["n_phi"], "options.n_phi"));
    if (j.contains("n_r")) opt.n_r = static_cast<int>(as_integer(j["n_r"], "options.n_r"));
    if (j.contains("denominator_cap"))
        opt.denominator_cap = as_integer(j["denominator_cap"], "options.denominator_cap");
    if (j.contains("max_strips"))
        opt.max_strips = static_cast<int>(as_integer(j["max_strips"], "options.max_strips"));
    if (j.contains("rng_seed"))
        opt.rng_seed = static_cast<std::uint64_t>(
            as_integer(j["rng_seed"], "options.rng_seed"));
    if (j.contains("thresholds")) {
        const json& th = j["thresholds"];
        if (!th.is_object()) bad_field("options.thresholds", "must be an object");
        if (th.contains("constancy"))
            opt.constancy = as_number(th["constancy"], "options.thresholds.constancy");
        if (th.contains("ctc")) opt.ctc = as_number(th["ctc"], "options.thresholds.ctc");
        if (th.contains("spiral_turns"))
            opt.spiral_turns =
                as_number(th["spiral_turns"], "options.thresholds.spiral_turns");
    }

    if (!(opt.epsilon0 > 0)) bad_field("options.epsilon0", "must be positive");
    if (!(opt.r_min > 0 && opt.r_min < opt.epsilon0))
        bad_field("options.r_min", "must satisfy 0 < r_min < epsilon0");
    if (opt.n_phi < 16) bad_field("options.n_phi", "must be at least 16");
    if (opt.n_r < 8) bad_field("options.n_r", "must be at least 8");
    if (opt.denominator_cap < 1) bad_field("options.denominator_cap", "must be >= 1");
    if (opt.max_strips < 1) bad_field("options.max_strips", "must be >= 1");
    if (!(opt.constancy > 0)) bad_field("options.thresholds.constancy", "must be positive");
    if (!(opt.ctc > 0)) bad_field("options.thresholds.ctc", "must be positive");
    if (!(opt.spiral_turns > 0))
        bad_field("options.thresholds.spiral_turns", "must be positive");
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw PreconditionError(std::string("scenario: not valid JSON: ") + e.what());
    }
    Scenario sc;
    const json& surf = require(j, "surface", "scenario");
    sc.surface.equation = parse_poly(require(surf, "equation", "surface"),
                                     "surface.equation");
    if (sc.surface.equation.is_zero()) bad_field("surface.equation", "must be nonzero");
    sc.surface.seed = parse_vec3(require(surf, "seed", "surface"), "surface.seed");

    sc.function = parse_poly(require(j, "function", "scenario"), "function");
    if (sc.function.is_zero()) bad_field("function", "must be nonzero");

    if (j.contains("metric")) {
        const json& met = j["metric"];
        const json& entries = require(met, "entries", "metric");
        if (!entries.is_array() || entries.size() != 9)
            bad_field("metric.entries", "must be an array of 9 polynomials (row major)");
        std::array<PolyFunction, 9> g;
        for (int i = 0; i < 9; ++i)
            g[i] = parse_poly(entries[i], "metric.entries[" + std::to_string(i) + "]");
        sc.metric = Metric::from_entries(g);
    }

    if (j.contains("options")) parse_options(j["options"], sc.options);
    sc.surface.epsilon0 = sc.options.epsilon0;
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("scenario: cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace singflow
