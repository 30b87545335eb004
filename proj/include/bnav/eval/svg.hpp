#pragma once

#include <string>
#include <vector>

namespace bnav::eval {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional error bars, same length as y or empty
};

struct LinePlot {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  bool y_unit = false;  // clamp the y axis to [0, 1]
};

// static vector plot, one polyline per series with optional error bars
void write_line_svg(const std::string& path, const LinePlot& plot);

struct ScatterPlot {
  std::string title, x_label, y_label, color_label;
  std::vector<double> x, y;
  std::vector<double> color;  // mapped onto a blue->red ramp; empty = flat
};

void write_scatter_svg(const std::string& path, const ScatterPlot& plot);

}  // namespace bnav::eval
