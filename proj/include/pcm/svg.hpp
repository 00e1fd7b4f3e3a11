#pragma once

// Minimal self-contained SVG line charts.

#include <string>
#include <vector>

namespace pcm {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = true;
    /// Values at or below this are drawn at the floor on a log axis.
    double log_floor = 1e-16;
    /// Optional horizontal reference line (e.g. a tolerance); ignored when <= 0.
    double guide = 0.0;
    /// Emitted verbatim inside an XML comment.
    std::string comment;
};

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace pcm
