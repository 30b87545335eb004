#pragma once

#include <array>
#include <vector>

namespace bnav::eval {

// Cyclic Jacobi diagonalization of a symmetric matrix (row-major n x n).
// Eigenvalues come back sorted descending; column j of `vectors` (row-major
// n x n) is the unit eigenvector for values[j], sign-fixed so the entry of
// largest magnitude is positive. Throws DatasetError on non-square input.
struct EigenResult {
  std::vector<double> values;
  std::vector<double> vectors;
};
EigenResult jacobi_eigen(const std::vector<double>& a, int n);

// Mean-centered projection onto the top two principal components.
std::vector<std::array<double, 2>> pca2d(const std::vector<std::vector<float>>& rows);

// Spearman rank correlation (average ranks on ties); NaN when either side is
// constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace bnav::eval
