#include "singflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace singflow {
namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string svg_plot(const std::vector<SvgSeries>& series, const std::string& x_label,
                     const std::string& y_label, const std::string& title) {
    constexpr double W = 800, H = 600, ml = 70, mr = 25, mt = 45, mb = 55;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (x0 > x1) { x0 = 0; x1 = 1; }
    if (y0 > y1) { y0 = 0; y1 = 1; }
    if (x1 - x0 < 1e-12) { x0 -= 0.5; x1 += 0.5; }
    if (y1 - y0 < 1e-12) { y0 -= 0.5; y1 += 0.5; }
    const double padx = 0.04 * (x1 - x0), pady = 0.04 * (y1 - y0);
    x0 -= padx; x1 += padx; y0 -= pady; y1 += pady;
    const auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
    const auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
        << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"25\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double x = x0 + (x1 - x0) * k / 5.0;
        const double y = y0 + (y1 - y0) * k / 5.0;
        out << "<line x1=\"" << px(x) << "\" y1=\"" << H - mb << "\" x2=\"" << px(x)
            << "\" y2=\"" << H - mb + 5 << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << px(x) << "\" y=\"" << H - mb + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"11\">" << fmt(x) << "</text>\n"
            << "<line x1=\"" << ml - 5 << "\" y1=\"" << py(y) << "\" x2=\"" << ml
            << "\" y2=\"" << py(y) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << ml - 8 << "\" y=\"" << py(y) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(y) << "</text>\n";
    }
    out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << x_label << "</text>\n"
        << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 " << (mt + H - mb) / 2 << ")\">" << y_label
        << "</text>\n";
    int li = 0;
    for (const auto& s : series) {
        if (s.points.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"1.3\" points=\"";
        for (const auto& [x, y] : s.points) out << fmt(px(x)) << "," << fmt(py(y)) << " ";
        out << "\"/>\n";
        if (!s.label.empty()) {
            out << "<text x=\"" << W - mr - 8 << "\" y=\"" << mt + 16 * (li + 1)
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
                   "fill=\"" << s.color << "\">" << s.label << "</text>\n";
            ++li;
        }
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace singflow
