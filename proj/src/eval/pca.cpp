#include "bnav/eval/pca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bnav/common.hpp"

namespace bnav::eval {

EigenResult jacobi_eigen(const std::vector<double>& a_in, int n) {
  if (n < 1 || a_in.size() != static_cast<size_t>(n) * n)
    throw DatasetError("jacobi_eigen: bad matrix shape");
  std::vector<double> a = a_in;
  std::vector<double> v(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;

  auto off = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a[static_cast<size_t>(i) * n + j] *
                                           a[static_cast<size_t>(i) * n + j];
    return s;
  };

  double tol = 1e-24 * std::max(1.0, off());
  for (int sweep = 0; sweep < 100 && off() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a[static_cast<size_t>(p) * n + q];
        if (std::abs(apq) < 1e-300) continue;
        double app = a[static_cast<size_t>(p) * n + p];
        double aqq = a[static_cast<size_t>(q) * n + q];
        double theta = (aqq - app) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a[static_cast<size_t>(k) * n + p];
          double akq = a[static_cast<size_t>(k) * n + q];
          a[static_cast<size_t>(k) * n + p] = c * akp - s * akq;
          a[static_cast<size_t>(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a[static_cast<size_t>(p) * n + k];
          double aqk = a[static_cast<size_t>(q) * n + k];
          a[static_cast<size_t>(p) * n + k] = c * apk - s * aqk;
          a[static_cast<size_t>(q) * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v[static_cast<size_t>(k) * n + p];
          double vkq = v[static_cast<size_t>(k) * n + q];
          v[static_cast<size_t>(k) * n + p] = c * vkp - s * vkq;
          v[static_cast<size_t>(k) * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return a[static_cast<size_t>(i) * n + i] > a[static_cast<size_t>(j) * n + j];
  });

  EigenResult res;
  res.values.resize(static_cast<size_t>(n));
  res.vectors.assign(static_cast<size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    int src = order[static_cast<size_t>(j)];
    res.values[static_cast<size_t>(j)] = a[static_cast<size_t>(src) * n + src];
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = v[static_cast<size_t>(i) * n + src];
      if (std::abs(e) > std::abs(best)) best = e;
    }
    double sign = best < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < n; ++i)
      res.vectors[static_cast<size_t>(i) * n + j] =
          sign * v[static_cast<size_t>(i) * n + src];
  }
  return res;
}

std::vector<std::array<double, 2>> pca2d(const std::vector<std::vector<float>>& rows) {
  if (rows.size() < 3) throw DatasetError("pca2d needs at least three rows");
  int d = static_cast<int>(rows.front().size());
  if (d < 2) throw DatasetError("pca2d needs at least two dimensions");
  for (const auto& r : rows)
    if (static_cast<int>(r.size()) != d) throw DatasetError("pca2d: ragged rows");

  std::vector<double> mean(static_cast<size_t>(d), 0.0);
  for (const auto& r : rows)
    for (int i = 0; i < d; ++i) mean[static_cast<size_t>(i)] += r[static_cast<size_t>(i)];
  for (double& m : mean) m /= static_cast<double>(rows.size());

  std::vector<double> cov(static_cast<size_t>(d) * d, 0.0);
  for (const auto& r : rows) {
    for (int i = 0; i < d; ++i) {
      double xi = r[static_cast<size_t>(i)] - mean[static_cast<size_t>(i)];
      for (int j = i; j < d; ++j) {
        double xj = r[static_cast<size_t>(j)] - mean[static_cast<size_t>(j)];
        cov[static_cast<size_t>(i) * d + j] += xi * xj;
      }
    }
  }
  double norm = 1.0 / static_cast<double>(rows.size() - 1);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      cov[static_cast<size_t>(i) * d + j] *= norm;
      cov[static_cast<size_t>(j) * d + i] = cov[static_cast<size_t>(i) * d + j];
    }

  EigenResult eig = jacobi_eigen(cov, d);
  std::vector<std::array<double, 2>> out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int pc = 0; pc < 2; ++pc) {
      double s = 0.0;
      for (int i = 0; i < d; ++i)
        s += (rows[r][static_cast<size_t>(i)] - mean[static_cast<size_t>(i)]) *
             eig.vectors[static_cast<size_t>(i) * d + pc];
      out[r][static_cast<size_t>(pc)] = s;
    }
  }
  return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& x) {
  size_t n = x.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return x[static_cast<size_t>(i)] < x[static_cast<size_t>(j)]; });
  std::vector<double> r(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n &&
           x[static_cast<size_t>(order[j + 1])] == x[static_cast<size_t>(order[i])])
      ++j;
    double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (size_t k = i; k <= j; ++k) r[static_cast<size_t>(order[k])] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DatasetError("spearman needs two equal-length samples");
  std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    double da = ra[i] - ma, db = rb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace bnav::eval
