#pragma once

// Reference computations written independently of the library code paths:
// textbook recursions and explicit matrix formulas, slow but obvious.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Type-7 quantile: linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const double lo = std::floor(pos);
  const double hi = std::ceil(pos);
  return v[static_cast<std::size_t>(lo)] + (pos - lo) * (v[static_cast<std::size_t>(hi)] - v[static_cast<std::size_t>(lo)]);
}

// Cox-de Boor recursion B_{i,p}(x) on the full knot vector t, with 0/0 = 0.
// The right end of the domain is attributed to the last non-degenerate span.
inline double bspline(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) {
    const double last = t.back();
    if (x == last) {
      // Last non-empty interval [t_i, t_{i+1}) closes on the right.
      int j = static_cast<int>(t.size()) - 2;
      while (j > 0 && t[j] == t[j + 1]) --j;
      return i == j ? 1.0 : 0.0;
    }
    return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  const double d1 = t[i + p] - t[i];
  const double d2 = t[i + p + 1] - t[i + 1];
  if (d1 > 0) a = (x - t[i]) / d1 * bspline(t, i, p - 1, x);
  if (d2 > 0) b = (t[i + p + 1] - x) / d2 * bspline(t, i + 1, p - 1, x);
  return a + b;
}

// Ordinary least squares through the explicit normal-equation inverse.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd xtx = x.transpose() * x;
  return xtx.inverse() * x.transpose() * y;
}

// Influence (hat) matrix X (X'X + S)^-1 X'.
inline Eigen::MatrixXd hat_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& s) {
  const Eigen::MatrixXd a = x.transpose() * x + s;
  return x * a.inverse() * x.transpose();
}

inline double sum_sq_second_differences(const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i + 2 < b.size(); ++i) {
    const double d = b(i) - 2.0 * b(i + 1) + b(i + 2);
    s += d * d;
  }
  return s;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace oracle
