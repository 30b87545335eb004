#include "bnav/eval/metrics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bnav/common.hpp"

namespace bnav::eval {

Interval wilson95(int successes, int trials) {
  if (trials < 1) throw DatasetError("wilson95 needs at least one trial");
  if (successes < 0 || successes > trials)
    throw DatasetError("wilson95: successes out of range");
  const double z = 1.959963984540054;  // Phi^-1(0.975)
  double n = trials;
  double p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = (z / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  Interval iv;
  iv.rate = center;
  iv.lo = std::max(0.0, center - half);
  iv.hi = std::min(1.0, center + half);
  return iv;
}

double success_fraction(int successes, int trials) {
  if (trials < 1) throw DatasetError("success fraction needs trials");
  return static_cast<double>(successes) / trials;
}

double MetricsRow::nan_value() {
  return std::numeric_limits<double>::quiet_NaN();
}

namespace {

void put(std::ostream& os, double v) {
  if (std::isnan(v))
    return;  // empty cell
  os << std::setprecision(17) << v;
}

// empty cell -> NaN
double cell_to_double(const std::string& s) {
  if (s.empty()) return MetricsRow::nan_value();
  return std::stod(s);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void MetricsTable::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open metrics for write: " + path);
  os << "# " << title << "\n";
  os << "condition,trials,successes,rate,ci_lo,ci_hi,mean_steps,memory_bytes,"
     << (extra_name.empty() ? "extra" : extra_name) << "\n";
  for (const MetricsRow& r : rows) {
    if (r.condition.find(',') != std::string::npos)
      throw IoError("metrics condition may not contain commas: " + r.condition);
    os << r.condition << ',' << r.trials << ',' << r.successes << ','
       << std::setprecision(17) << r.rate << ',' << r.ci_lo << ',' << r.ci_hi
       << ',';
    put(os, r.mean_steps);
    os << ',';
    put(os, r.memory_bytes);
    os << ',';
    put(os, r.extra);
    os << '\n';
  }
  if (!os) throw IoError("metrics write failed: " + path);
}

MetricsTable MetricsTable::read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open metrics: " + path);
  MetricsTable t;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
    throw IoError("metrics file missing title line: " + path);
  t.title = line.substr(2);
  if (!std::getline(is, line)) throw IoError("metrics file missing header: " + path);
  auto header = split_csv(line);
  if (header.size() != 9 || header[0] != "condition")
    throw IoError("unexpected metrics header: " + path);
  t.extra_name = header[8] == "extra" ? "" : header[8];
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != 9) throw IoError("short metrics row: " + path);
    MetricsRow r;
    r.condition = cells[0];
    r.trials = std::stoi(cells[1]);
    r.successes = std::stoi(cells[2]);
    r.rate = std::stod(cells[3]);
    r.ci_lo = std::stod(cells[4]);
    r.ci_hi = std::stod(cells[5]);
    r.mean_steps = cell_to_double(cells[6]);
    r.memory_bytes = cell_to_double(cells[7]);
    r.extra = cell_to_double(cells[8]);
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace bnav::eval
