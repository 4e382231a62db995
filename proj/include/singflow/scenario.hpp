#pragma once

#include <cstdint>
#include <string>

#include "singflow/geometry.hpp"

namespace singflow {

struct ScenarioOptions {
    double epsilon0 = 0.5;
    double r_min = 1e-4;
    int n_phi = 64;
    int n_r = 72;
    std::int64_t denominator_cap = 16;
    int max_strips = 4;
    std::uint64_t rng_seed = 1;
    // thresholds
    double constancy = 1e-3;
    double ctc = 0.05;
    double spiral_turns = 1.25;
};

struct Scenario {
    Surface surface;
    Metric metric;  // Euclidean unless given
    PolyFunction function;
    ScenarioOptions options;
};

// JSON scenario file; malformed content raises PreconditionError naming the
// offending field.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);

}  // namespace singflow
