#include "martingap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace martingap {
namespace {

constexpr double kWidth = 860.0;
constexpr double kHeight = 520.0;
constexpr double kLeft = 72.0;
constexpr double kRight = 24.0;
constexpr double kTop = 44.0;
constexpr double kBottom = 56.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v, const char* spec) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string coord(double v) { return fmt(v, "%.2f"); }

std::string escape_xml(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Axis {
    bool log = false;
    double lo = 0.0, hi = 1.0;  // transformed range

    double transform(double v) const { return log ? std::log10(v) : v; }
    bool valid(double v) const {
        return std::isfinite(v) && (!log || v > 0.0);
    }
    // Fraction of the way across the plotted range.
    double unit(double v) const {
        return (transform(v) - lo) / (hi - lo);
    }
};

Axis fit_axis(const std::vector<const SvgSeries*>& series, bool log,
              bool use_x) {
    Axis ax;
    ax.log = log;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto* s : series) {
        const auto& vals = use_x ? s->x : s->y;
        const auto& other = use_x ? s->y : s->x;
        for (std::size_t i = 0; i < vals.size() && i < other.size(); ++i) {
            if (!ax.valid(vals[i]) || !std::isfinite(other[i])) continue;
            double t = ax.transform(vals[i]);
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    }
    if (!(lo <= hi)) {  // no drawable points
        lo = log ? 0.0 : 0.0;
        hi = log ? 1.0 : 1.0;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    } else {
        double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    ax.lo = lo;
    ax.hi = hi;
    return ax;
}

std::string tick_label(const Axis& ax, double t) {
    double v = ax.log ? std::pow(10.0, t) : t;
    return fmt(v, "%.4g");
}

}  // namespace

std::string render_svg(const SvgPlot& plot) {
    std::vector<const SvgSeries*> all;
    for (const auto& s : plot.series) all.push_back(&s);
    Axis ax = fit_axis(all, plot.log_x, true);
    Axis ay = fit_axis(all, plot.log_y, false);

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + ax.unit(v) * plot_w; };
    auto py = [&](double v) { return kTop + (1.0 - ay.unit(v)) * plot_h; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
        << kHeight << "\">\n";

    if (!plot.data_csv.empty()) {
        std::string csv = plot.data_csv;
        // CDATA cannot contain its own terminator.
        std::size_t pos;
        while ((pos = csv.find("]]>")) != std::string::npos)
            csv.replace(pos, 3, "]]&gt;");
        out << "<metadata id=\"data-table\"><![CDATA[\n"
            << csv << "]]></metadata>\n";
    }

    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"#ffffff\"/>\n";
    out << "<text x=\"" << coord(kWidth / 2) << "\" y=\"26\" "
        << "text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"16\" fill=\"#222222\">" << escape_xml(plot.title)
        << "</text>\n";

    // Grid and ticks: five divisions on each transformed axis.
    out << "<g font-family=\"sans-serif\" font-size=\"11\" "
        << "fill=\"#444444\">\n";
    for (int i = 0; i <= 5; ++i) {
        double t = ax.lo + (ax.hi - ax.lo) * i / 5.0;
        double x = kLeft + plot_w * i / 5.0;
        out << "<line x1=\"" << coord(x) << "\" y1=\"" << coord(kTop)
            << "\" x2=\"" << coord(x) << "\" y2=\"" << coord(kTop + plot_h)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << coord(x) << "\" y=\""
            << coord(kTop + plot_h + 18) << "\" text-anchor=\"middle\">"
            << escape_xml(tick_label(ax, t)) << "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        double t = ay.lo + (ay.hi - ay.lo) * i / 5.0;
        double y = kTop + plot_h * (1.0 - i / 5.0);
        out << "<line x1=\"" << coord(kLeft) << "\" y1=\"" << coord(y)
            << "\" x2=\"" << coord(kLeft + plot_w) << "\" y2=\"" << coord(y)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        out << "<text x=\"" << coord(kLeft - 8) << "\" y=\"" << coord(y + 4)
            << "\" text-anchor=\"end\">" << escape_xml(tick_label(ay, t))
            << "</text>\n";
    }
    out << "</g>\n";

    out << "<rect x=\"" << coord(kLeft) << "\" y=\"" << coord(kTop)
        << "\" width=\"" << coord(plot_w) << "\" height=\"" << coord(plot_h)
        << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n";

    out << "<text x=\"" << coord(kLeft + plot_w / 2) << "\" y=\""
        << coord(kHeight - 14)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\" fill=\"#222222\">" << escape_xml(plot.x_label)
        << "</text>\n";
    out << "<text x=\"20\" y=\"" << coord(kTop + plot_h / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\" fill=\"#222222\" transform=\"rotate(-90 20 "
        << coord(kTop + plot_h / 2) << ")\">" << escape_xml(plot.y_label)
        << "</text>\n";

    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const SvgSeries& s = plot.series[si];
        const char* color = kPalette[si % kPaletteSize];
        if (s.line) {
            std::string points;
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!ax.valid(s.x[i]) || !ay.valid(s.y[i])) continue;
                if (!points.empty()) points += " ";
                points += coord(px(s.x[i])) + "," + coord(py(s.y[i]));
            }
            if (!points.empty())
                out << "<polyline fill=\"none\" stroke=\"" << color
                    << "\" stroke-width=\"1.5\" points=\"" << points
                    << "\"/>\n";
        }
        if (s.markers) {
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!ax.valid(s.x[i]) || !ay.valid(s.y[i])) continue;
                out << "<circle cx=\"" << coord(px(s.x[i])) << "\" cy=\""
                    << coord(py(s.y[i])) << "\" r=\"3\" fill=\"" << color
                    << "\" fill-opacity=\"0.75\"/>\n";
            }
        }
    }

    // Legend, one row per series, inside the top-right corner.
    double ly = kTop + 14.0;
    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const char* color = kPalette[si % kPaletteSize];
        double lx = kLeft + plot_w - 180.0;
        out << "<line x1=\"" << coord(lx) << "\" y1=\"" << coord(ly - 4)
            << "\" x2=\"" << coord(lx + 22) << "\" y2=\"" << coord(ly - 4)
            << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
        out << "<text x=\"" << coord(lx + 28) << "\" y=\"" << coord(ly)
            << "\" font-family=\"sans-serif\" font-size=\"12\" "
            << "fill=\"#222222\">" << escape_xml(plot.series[si].label)
            << "</text>\n";
        ly += 18.0;
    }

    out << "</svg>\n";
    return out.str();
}

}  // namespace martingap
