#pragma once

#include <algorithm>
#include <cstdio>
#include <string>

#include "ctxppi/analysis.hpp"
#include "ctxppi/tsv.hpp"

namespace ctxppi {

namespace detail {

// Blue (-1) through white (0) to red (+1).
inline std::string heat_color(double v) {
    v = std::clamp(v, -1.0, 1.0);
    int r, g, b;
    if (v >= 0.0) {
        r = 255;
        g = b = static_cast<int>(255.0 * (1.0 - v));
    } else {
        b = 255;
        r = g = static_cast<int>(255.0 * (1.0 + v));
    }
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace detail

inline std::string render_svg_heatmap(const SimilarityMatrix& sim) {
    const std::size_t n = sim.labels.size();
    const int cell = 14;
    const int margin = 110;
    const int size = margin + static_cast<int>(n) * cell + 10;
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size) +
           "\" height=\"" + std::to_string(size) + "\">\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const int x = margin + static_cast<int>(j) * cell;
            const int y = margin + static_cast<int>(i) * cell;
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
                   "\" fill=\"" + detail::heat_color(sim.values.at(i, j)) + "\"><title>" +
                   detail::xml_escape(sim.labels[i]) + " / " + detail::xml_escape(sim.labels[j]) +
                   ": " + fmt_double(sim.values.at(i, j)) + "</title></rect>\n";
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int y = margin + static_cast<int>(i) * cell + cell - 3;
        svg += "<text x=\"4\" y=\"" + std::to_string(y) + "\" font-size=\"10\">" +
               detail::xml_escape(sim.labels[i]) + "</text>\n";
        const int x = margin + static_cast<int>(i) * cell + cell - 3;
        svg += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(margin - 4) +
               "\" font-size=\"10\" transform=\"rotate(-90 " + std::to_string(x) + " " +
               std::to_string(margin - 4) + ")\">" + detail::xml_escape(sim.labels[i]) +
               "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline std::string similarity_to_csv(const SimilarityMatrix& sim) {
    std::string csv = "label";
    for (const auto& l : sim.labels) csv += "," + l;
    csv += "\n";
    for (std::size_t i = 0; i < sim.labels.size(); ++i) {
        csv += sim.labels[i];
        for (std::size_t j = 0; j < sim.labels.size(); ++j)
            csv += "," + fmt_double(sim.values.at(i, j));
        csv += "\n";
    }
    return csv;
}

}  // namespace ctxppi
