#pragma once

// Static SVG line plots. Output is a pure function of the input data.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace opstab {

struct PlotSeries {
    std::string label;
    std::vector<double> y; ///< y[n] plotted at x = n
    std::string color = "#1f4e9c";
};

struct PlotPanel {
    std::string title;
    std::vector<PlotSeries> series;
    double y_min = 0.0, y_max = 1.0;
};

namespace detail {

inline std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace detail

/// Stacked panels sharing the horizontal axis. Long series are reduced to
/// per-pixel maxima so spikes survive.
inline std::string render_svg(const std::vector<PlotPanel>& panels, const std::string& x_label) {
    constexpr double width = 800, panel_h = 220, left = 60, right = 20, top = 30, gap = 50;
    const double plot_w = width - left - right;
    const double height = top + static_cast<double>(panels.size()) * (panel_h + gap);
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fixed(width) + "\" height=\"" +
                    detail::fixed(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const PlotPanel& panel = panels[p];
        const double y0 = top + static_cast<double>(p) * (panel_h + gap);
        const double span = panel.y_max > panel.y_min ? panel.y_max - panel.y_min : 1.0;
        s += "<text x=\"" + detail::fixed(left) + "\" y=\"" + detail::fixed(y0 - 8) + "\">" +
             detail::escape_xml(panel.title) + "</text>\n";
        s += "<rect x=\"" + detail::fixed(left) + "\" y=\"" + detail::fixed(y0) + "\" width=\"" + detail::fixed(plot_w) +
             "\" height=\"" + detail::fixed(panel_h) + "\" fill=\"none\" stroke=\"#444\"/>\n";
        for (double f : {0.0, 0.5, 1.0}) {
            const double yy = y0 + panel_h * (1.0 - f);
            s += "<text x=\"" + detail::fixed(left - 6) + "\" y=\"" + detail::fixed(yy + 4) + "\" text-anchor=\"end\">" +
                 detail::fixed(panel.y_min + f * span) + "</text>\n";
        }
        std::size_t longest = 0;
        for (const auto& ser : panel.series) longest = std::max(longest, ser.y.size());
        for (std::size_t k = 0; k < panel.series.size(); ++k) {
            const PlotSeries& ser = panel.series[k];
            if (ser.y.empty()) continue;
            const std::size_t bins = std::min<std::size_t>(ser.y.size(), static_cast<std::size_t>(plot_w));
            std::string pts;
            for (std::size_t i = 0; i < bins; ++i) {
                const std::size_t a = i * ser.y.size() / bins, b = (i + 1) * ser.y.size() / bins;
                const double v = *std::max_element(ser.y.begin() + static_cast<std::ptrdiff_t>(a),
                                                   ser.y.begin() + static_cast<std::ptrdiff_t>(b));
                const double xx = left + plot_w * static_cast<double>(a) / static_cast<double>(std::max<std::size_t>(1, longest - 1));
                const double yy = y0 + panel_h * (1.0 - std::clamp((v - panel.y_min) / span, 0.0, 1.0));
                pts += detail::fixed(xx) + "," + detail::fixed(yy) + " ";
            }
            s += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
            s += "<text x=\"" + detail::fixed(left + plot_w - 4) + "\" y=\"" + detail::fixed(y0 + 16 + 14 * static_cast<double>(k)) +
                 "\" text-anchor=\"end\" fill=\"" + ser.color + "\">" + detail::escape_xml(ser.label) + "</text>\n";
        }
        s += "<text x=\"" + detail::fixed(left + plot_w / 2) + "\" y=\"" + detail::fixed(y0 + panel_h + 18) +
             "\" text-anchor=\"middle\">" + detail::escape_xml(x_label) + " (0 .. " + std::to_string(longest ? longest - 1 : 0) +
             ")</text>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace opstab
