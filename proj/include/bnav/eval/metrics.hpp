#pragma once

#include <string>
#include <vector>

namespace bnav::eval {

struct Interval {
  double rate = 0.0;  // interval center, not the raw success fraction
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval at 95% (z = 1.96). Sane at 0/n and n/n where the
// normal approximation collapses. Throws DatasetError when trials < 1.
Interval wilson95(int successes, int trials);

// one experimental condition; unused numeric fields stay NaN and print empty
struct MetricsRow {
  std::string condition;
  int trials = 0;
  int successes = 0;
  double rate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double mean_steps = nan_value();
  double memory_bytes = nan_value();
  double extra = nan_value();  // sweep-specific scalar, named by the table

  static double nan_value();
};

struct MetricsTable {
  std::string title;
  std::string extra_name;  // header for the extra column, empty when unused
  std::vector<MetricsRow> rows;

  void write_csv(const std::string& path) const;
  static MetricsTable read_csv(const std::string& path);
};

double success_fraction(int successes, int trials);

}  // namespace bnav::eval
