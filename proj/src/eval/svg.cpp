#include "bnav/eval/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bnav/common.hpp"

namespace bnav::eval {
namespace {

constexpr double kW = 720, kH = 480;
constexpr double kL = 70, kR = 160, kT = 48, kB = 56;  // margins; legend on the right

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

struct Range {
  double lo = 0.0, hi = 1.0;
  double map(double v, double px_lo, double px_hi) const {
    double t = (v - lo) / (hi - lo);
    return px_lo + t * (px_hi - px_lo);
  }
};

Range pad_range(double lo, double hi) {
  if (!(lo < hi)) {  // degenerate extent still needs a drawable axis
    lo -= 0.5;
    hi += 0.5;
  }
  double pad = 0.06 * (hi - lo);
  return Range{lo - pad, hi + pad};
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out.push_back(c);
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

void axes(std::ostream& os, const Range& rx, const Range& ry,
          const std::string& title, const std::string& xl, const std::string& yl) {
  os << "<rect x='0' y='0' width='" << kW << "' height='" << kH
     << "' fill='white'/>\n";
  os << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' "
     << "font-family='sans-serif' font-size='16'>" << esc(title) << "</text>\n";
  double x0 = kL, x1 = kW - kR, y0 = kH - kB, y1 = kT;
  os << "<line x1='" << x0 << "' y1='" << y0 << "' x2='" << x1 << "' y2='" << y0
     << "' stroke='black'/>\n";
  os << "<line x1='" << x0 << "' y1='" << y0 << "' x2='" << x0 << "' y2='" << y1
     << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    double t = i / 5.0;
    double vx = rx.lo + t * (rx.hi - rx.lo);
    double vy = ry.lo + t * (ry.hi - ry.lo);
    double px = x0 + t * (x1 - x0);
    double py = y0 + t * (y1 - y0);
    os << "<line x1='" << px << "' y1='" << y0 << "' x2='" << px << "' y2='"
       << y0 + 5 << "' stroke='black'/>\n";
    os << "<text x='" << px << "' y='" << y0 + 20
       << "' text-anchor='middle' font-family='sans-serif' font-size='11'>"
       << num(vx) << "</text>\n";
    os << "<line x1='" << x0 - 5 << "' y1='" << py << "' x2='" << x0 << "' y2='"
       << py << "' stroke='black'/>\n";
    os << "<text x='" << x0 - 8 << "' y='" << py + 4
       << "' text-anchor='end' font-family='sans-serif' font-size='11'>"
       << num(vy) << "</text>\n";
  }
  os << "<text x='" << (x0 + x1) / 2 << "' y='" << kH - 12
     << "' text-anchor='middle' font-family='sans-serif' font-size='13'>"
     << esc(xl) << "</text>\n";
  os << "<text x='18' y='" << (y0 + y1) / 2
     << "' text-anchor='middle' font-family='sans-serif' font-size='13' "
     << "transform='rotate(-90 18 " << (y0 + y1) / 2 << ")'>" << esc(yl)
     << "</text>\n";
}

}  // namespace

void write_line_svg(const std::string& path, const LinePlot& plot) {
  if (plot.series.empty()) throw DatasetError("line plot needs at least one series");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const Series& s : plot.series) {
    if (s.x.size() != s.y.size()) throw DatasetError("series x/y length mismatch");
    if (!s.lo.empty() && (s.lo.size() != s.y.size() || s.hi.size() != s.y.size()))
      throw DatasetError("series error-bar length mismatch");
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      double lo = s.lo.empty() ? s.y[i] : s.lo[i];
      double hi = s.hi.empty() ? s.y[i] : s.hi[i];
      ymin = std::min(ymin, lo);
      ymax = std::max(ymax, hi);
    }
  }
  if (!std::isfinite(xmin)) throw DatasetError("line plot has no points");
  Range rx = pad_range(xmin, xmax);
  Range ry = plot.y_unit ? Range{-0.03, 1.03} : pad_range(ymin, ymax);

  std::ofstream os(path);
  if (!os) throw IoError("cannot open svg for write: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='"
     << kH << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
  axes(os, rx, ry, plot.title, plot.x_label, plot.y_label);
  double x0 = kL, x1 = kW - kR, y0 = kH - kB, y1 = kT;
  for (size_t si = 0; si < plot.series.size(); ++si) {
    const Series& s = plot.series[si];
    const char* color = kPalette[si % kPaletteSize];
    std::ostringstream pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      double px = rx.map(s.x[i], x0, x1);
      double py = ry.map(s.y[i], y0, y1);
      pts << px << ',' << py << ' ';
      os << "<circle cx='" << px << "' cy='" << py << "' r='3' fill='" << color
         << "'/>\n";
      if (!s.lo.empty()) {
        double pl = ry.map(s.lo[i], y0, y1);
        double ph = ry.map(s.hi[i], y0, y1);
        os << "<line x1='" << px << "' y1='" << pl << "' x2='" << px << "' y2='"
           << ph << "' stroke='" << color << "' stroke-width='1'/>\n";
        os << "<line x1='" << px - 3 << "' y1='" << pl << "' x2='" << px + 3
           << "' y2='" << pl << "' stroke='" << color << "'/>\n";
        os << "<line x1='" << px - 3 << "' y1='" << ph << "' x2='" << px + 3
           << "' y2='" << ph << "' stroke='" << color << "'/>\n";
      }
    }
    os << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
       << "' stroke-width='2'/>\n";
    double ly = kT + 16 + 18 * static_cast<double>(si);
    os << "<line x1='" << kW - kR + 12 << "' y1='" << ly << "' x2='"
       << kW - kR + 34 << "' y2='" << ly << "' stroke='" << color
       << "' stroke-width='2'/>\n";
    os << "<text x='" << kW - kR + 40 << "' y='" << ly + 4
       << "' font-family='sans-serif' font-size='12'>" << esc(s.label)
       << "</text>\n";
  }
  os << "</svg>\n";
  if (!os) throw IoError("svg write failed: " + path);
}

void write_scatter_svg(const std::string& path, const ScatterPlot& plot) {
  if (plot.x.size() != plot.y.size() || plot.x.empty())
    throw DatasetError("scatter needs matching non-empty x/y");
  if (!plot.color.empty() && plot.color.size() != plot.x.size())
    throw DatasetError("scatter color length mismatch");
  double xmin = *std::min_element(plot.x.begin(), plot.x.end());
  double xmax = *std::max_element(plot.x.begin(), plot.x.end());
  double ymin = *std::min_element(plot.y.begin(), plot.y.end());
  double ymax = *std::max_element(plot.y.begin(), plot.y.end());
  Range rx = pad_range(xmin, xmax), ry = pad_range(ymin, ymax);
  double cmin = 0.0, cmax = 1.0;
  if (!plot.color.empty()) {
    cmin = *std::min_element(plot.color.begin(), plot.color.end());
    cmax = *std::max_element(plot.color.begin(), plot.color.end());
    if (cmin == cmax) cmax = cmin + 1.0;
  }

  std::ofstream os(path);
  if (!os) throw IoError("cannot open svg for write: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='"
     << kH << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
  axes(os, rx, ry, plot.title, plot.x_label, plot.y_label);
  double x0 = kL, x1 = kW - kR, y0 = kH - kB, y1 = kT;
  for (size_t i = 0; i < plot.x.size(); ++i) {
    double t = plot.color.empty()
                   ? 0.5
                   : (plot.color[i] - cmin) / (cmax - cmin);
    int rch = static_cast<int>(std::lround(40 + 200 * t));
    int bch = static_cast<int>(std::lround(220 - 180 * t));
    os << "<circle cx='" << rx.map(plot.x[i], x0, x1) << "' cy='"
       << ry.map(plot.y[i], y0, y1) << "' r='3' fill='rgb(" << rch << ",60,"
       << bch << ")' fill-opacity='0.75'/>\n";
  }
  if (!plot.color_label.empty()) {
    os << "<text x='" << kW - kR + 12 << "' y='" << kT + 16
       << "' font-family='sans-serif' font-size='12'>" << esc(plot.color_label)
       << ": blue low, red high</text>\n";
  }
  os << "</svg>\n";
  if (!os) throw IoError("svg write failed: " + path);
}

}  // namespace bnav::eval
