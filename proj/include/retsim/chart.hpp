#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "retsim/report_io.hpp"

namespace retsim {

// One line chart over report columns: x = round, y clamped to [0,1].
struct ChartSeries {
    std::string label;
    std::string column;
};

struct ChartSpec {
    std::string title = "contamination dynamics";
    std::string output = "chart.svg";
    std::vector<ChartSeries> series;
};

namespace detail_chart {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    return colors[i % (sizeof(colors) / sizeof(colors[0]))];
}

inline std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail_chart

// Deterministic byte output for identical inputs: fixed layout, fixed number
// formatting, no timestamps.
inline std::string render_chart_svg(const ChartSpec& spec, const CsvTable& table) {
    if (spec.series.empty())
        throw validation_error("chart: series list is empty");
    std::vector<double> rounds = table.column("round");
    std::vector<std::vector<double>> values;
    for (const auto& s : spec.series) values.push_back(table.column(s.column));

    const double width = 860.0, height = 520.0;
    const double left = 70.0, right = 660.0, top = 60.0, bottom = 470.0;
    double x_max = 1.0;
    for (double r : rounds) x_max = std::max(x_max, r);

    auto x_pos = [&](double round) {
        return left + (right - left) * (round / x_max);
    };
    auto y_pos = [&](double rate) {
        double v = std::min(1.0, std::max(0.0, rate));
        return bottom - (bottom - top) * v;
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           detail_chart::num(width) + "\" height=\"" + detail_chart::num(height) +
           "\" viewBox=\"0 0 " + detail_chart::num(width) + " " +
           detail_chart::num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + detail_chart::num((left + right) / 2) +
           "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"18\">" +
           detail_chart::escape_xml(spec.title) + "</text>\n";

    // Axes.
    svg += "<line x1=\"" + detail_chart::num(left) + "\" y1=\"" +
           detail_chart::num(top) + "\" x2=\"" + detail_chart::num(left) +
           "\" y2=\"" + detail_chart::num(bottom) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail_chart::num(left) + "\" y1=\"" +
           detail_chart::num(bottom) + "\" x2=\"" + detail_chart::num(right) +
           "\" y2=\"" + detail_chart::num(bottom) + "\" stroke=\"black\"/>\n";

    // Y ticks at fixed rates.
    for (double tick : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        double y = y_pos(tick);
        svg += "<line x1=\"" + detail_chart::num(left - 5) + "\" y1=\"" +
               detail_chart::num(y) + "\" x2=\"" + detail_chart::num(right) +
               "\" y2=\"" + detail_chart::num(y) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + detail_chart::num(left - 10) + "\" y=\"" +
               detail_chart::num(y + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" +
               detail_chart::num(tick) + "</text>\n";
    }

    // X ticks: every round up to 10 rounds, every 5 beyond.
    int step = x_max > 10.0 ? 5 : 1;
    for (int r = 0; r <= static_cast<int>(x_max); r += step) {
        double x = x_pos(r);
        svg += "<line x1=\"" + detail_chart::num(x) + "\" y1=\"" +
               detail_chart::num(bottom) + "\" x2=\"" + detail_chart::num(x) +
               "\" y2=\"" + detail_chart::num(bottom + 5) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail_chart::num(x) + "\" y=\"" +
               detail_chart::num(bottom + 20) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
               std::to_string(r) + "</text>\n";
    }
    svg += "<text x=\"" + detail_chart::num((left + right) / 2) + "\" y=\"" +
           detail_chart::num(bottom + 40) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
           "round</text>\n";

    // Series polylines.
    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        std::string points;
        for (std::size_t i = 0; i < rounds.size(); ++i) {
            if (i > 0) points += " ";
            points += detail_chart::num(x_pos(rounds[i])) + "," +
                      detail_chart::num(y_pos(values[si][i]));
        }
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += detail_chart::palette(si);
        svg += "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    }

    // Legend.
    for (std::size_t si = 0; si < spec.series.size(); ++si) {
        double y = top + 20.0 * static_cast<double>(si);
        svg += "<rect x=\"" + detail_chart::num(right + 20) + "\" y=\"" +
               detail_chart::num(y - 9) + "\" width=\"14\" height=\"14\" fill=\"";
        svg += detail_chart::palette(si);
        svg += "\"/>\n";
        svg += "<text x=\"" + detail_chart::num(right + 40) + "\" y=\"" +
               detail_chart::num(y + 3) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" +
               detail_chart::escape_xml(spec.series[si].label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace retsim
