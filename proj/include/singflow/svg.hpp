#pragma once

#include <string>
#include <utility>
#include <vector>

namespace singflow {

// Minimal self-contained SVG line plots: axes, ticks, labelled polylines.
struct SvgSeries {
    std::vector<std::pair<double, double>> points;
    std::string color = "#1f6fb2";
    std::string label;
};

std::string svg_plot(const std::vector<SvgSeries>& series, const std::string& x_label,
                     const std::string& y_label, const std::string& title);

}  // namespace singflow
