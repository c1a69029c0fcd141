#pragma once
// Small self-contained SVG line charts for the per-threshold metric curves.
// Output is deterministic for identical inputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace xaieval {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<std::optional<double>> y;  // null points are skipped
};

namespace detail {

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

}  // namespace detail

// One curve per series, x on the threshold axis. Throws when nothing is
// plottable.
inline std::string render_line_chart(const std::string& title, const std::string& xlabel,
                                     const std::string& ylabel,
                                     const std::vector<PlotSeries>& series) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    const double W = 680, H = 440;
    const double ml = 70, mr = 160, mt = 46, mb = 56;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!s.y[i]) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, *s.y[i]);
            ymax = std::max(ymax, *s.y[i]);
        }
    }
    if (xmin > xmax) throw std::runtime_error("plot: no plottable points");
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    }
    const double ypad = 0.06 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"16\">" << title << "</text>\n";

    // axes
    os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
       << mt + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
       << "\" stroke=\"black\"/>\n";

    // ticks: x at every distinct sample, y at 5 even steps
    std::vector<double> xticks;
    for (const auto& s : series)
        for (double x : s.x)
            if (std::find(xticks.begin(), xticks.end(), x) == xticks.end()) xticks.push_back(x);
    std::sort(xticks.begin(), xticks.end());
    for (double x : xticks) {
        os << "<line x1=\"" << detail::fmt_coord(px(x)) << "\" y1=\"" << mt + ph << "\" x2=\""
           << detail::fmt_coord(px(x)) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << detail::fmt_coord(px(x)) << "\" y=\"" << mt + ph + 20
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::fmt_tick(x) << "</text>\n";
    }
    for (int t = 0; t <= 5; ++t) {
        const double y = ymin + (ymax - ymin) * t / 5.0;
        os << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt_coord(py(y)) << "\" x2=\"" << ml
           << "\" y2=\"" << detail::fmt_coord(py(y)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ml - 9 << "\" y=\"" << detail::fmt_coord(py(y) + 4)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
           << detail::fmt_tick(y) << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 14
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xlabel
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << mt + ph / 2
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
       << " transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">" << ylabel << "</text>\n";

    // curves
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 6];
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!s.y[i]) continue;
            pts << detail::fmt_coord(px(s.x[i])) << ',' << detail::fmt_coord(py(*s.y[i])) << ' ';
        }
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\""
           << pts.str() << "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!s.y[i]) continue;
            os << "<circle cx=\"" << detail::fmt_coord(px(s.x[i])) << "\" cy=\""
               << detail::fmt_coord(py(*s.y[i])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        // legend
        const double ly = mt + 16 + 20.0 * static_cast<double>(si);
        os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 34
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly + 4
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<PlotSeries>& series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("plot: cannot write " + path);
    out << render_line_chart(title, xlabel, ylabel, series);
}

}  // namespace xaieval
