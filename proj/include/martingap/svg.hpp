#pragma once

#include <string>
#include <vector>

namespace martingap {

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool line = false;     // connect points in order
    bool markers = true;   // draw circles at points
};

// Self-contained figure: the rendered chart plus the plotted numbers as a
// CSV block inside <metadata>, so the figure is auditable without any
// plotting toolchain.
struct SvgPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<SvgSeries> series;
    std::string data_csv;
};

// Deterministic: identical plots render to identical bytes. Nonpositive
// values are dropped on log axes.
std::string render_svg(const SvgPlot& plot);

}  // namespace martingap
