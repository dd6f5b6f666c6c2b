#include "gamaudit/spline.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gamaudit/error.hpp"
#include "gamaudit/log.hpp"

namespace gamaudit {

std::vector<double> KnotVector::full() const {
  std::vector<double> t;
  t.reserve(interior.size() + 2 * (kSplineDegree + 1));
  t.insert(t.end(), kSplineDegree + 1, lower);
  t.insert(t.end(), interior.begin(), interior.end());
  t.insert(t.end(), kSplineDegree + 1, upper);
  return t;
}

namespace {

// Type-7 (linear interpolation) quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

KnotVector make_knots(std::span<const double> values, int k) {
  if (k < kMinBasisSize) throw Error(ErrorKind::Basis, fmt::format("basis size {} below minimum {}", k, kMinBasisSize));
  std::vector<double> distinct(values.begin(), values.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  const int feasible = static_cast<int>(std::min<std::size_t>(distinct.size(), static_cast<std::size_t>(k)));
  if (feasible < kMinBasisSize)
    throw Error(ErrorKind::Basis,
                fmt::format("{} distinct values cannot support a cubic spline (need {})", distinct.size(), kMinBasisSize));
  if (feasible < k) {
    log::warn("only {} distinct values; basis size reduced from {} to {}", distinct.size(), k, feasible);
    k = feasible;
  }

  KnotVector kv;
  kv.lower = distinct.front();
  kv.upper = distinct.back();
  const int n_interior = k - kSplineDegree - 1;
  for (int i = 1; i <= n_interior; ++i) {
    const double q = quantile_sorted(distinct, static_cast<double>(i) / static_cast<double>(k - 3));
    if (q > kv.lower && q < kv.upper && (kv.interior.empty() || q > kv.interior.back())) kv.interior.push_back(q);
  }
  if (static_cast<int>(kv.interior.size()) < n_interior)
    log::warn("duplicate knots removed; basis size reduced to {}", kv.num_basis());
  return kv;
}

Eigen::MatrixXd eval_basis(const KnotVector& kv, std::span<const double> x) {
  const auto t = kv.full();
  const int k = kv.num_basis();
  const int p = kSplineDegree;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), k);

  double left[kSplineDegree + 1];
  double right[kSplineDegree + 1];
  double N[kSplineDegree + 1];
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double u = std::clamp(x[r], kv.lower, kv.upper);
    // Span index s with t[s] <= u < t[s+1]; the right boundary maps to the last span.
    int s;
    if (u >= kv.upper) {
      s = k - 1;
    } else {
      s = static_cast<int>(std::upper_bound(t.begin() + p, t.begin() + k + 1, u) - t.begin()) - 1;
    }
    // Cox-de Boor triangle for the p+1 non-zero functions on span s.
    N[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = u - t[s + 1 - j];
      right[j] = t[s + j] - u;
      double saved = 0.0;
      for (int q = 0; q < j; ++q) {
        const double temp = N[q] / (right[q + 1] + left[j - q]);
        N[q] = saved + right[q + 1] * temp;
        saved = left[j - q] * temp;
      }
      N[j] = saved;
    }
    for (int j = 0; j <= p; ++j) B(static_cast<Eigen::Index>(r), s - p + j) = N[j];
  }
  return B;
}

Eigen::MatrixXd difference_operator(int k) {
  if (k < 3) throw Error(ErrorKind::Basis, "difference operator needs at least 3 coefficients");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(k - 2, k);
  for (int i = 0; i < k - 2; ++i) {
    D(i, i) = 1.0;
    D(i, i + 1) = -2.0;
    D(i, i + 2) = 1.0;
  }
  return D;
}

Eigen::MatrixXd penalty_matrix(int k) {
  if (k < kMinBasisSize) throw Error(ErrorKind::Basis, fmt::format("basis size {} below minimum", k));
  const auto D = difference_operator(k);
  return D.transpose() * D;
}

std::vector<double> greville_abscissae(const KnotVector& kv) {
  const auto t = kv.full();
  const int k = kv.num_basis();
  std::vector<double> g(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) g[i] = (t[i + 1] + t[i + 2] + t[i + 3]) / 3.0;
  return g;
}

Eigen::MatrixXd divided_difference_operator(const KnotVector& kv) {
  const auto g = greville_abscissae(kv);
  const int k = kv.num_basis();
  const double mean_gap = (g.back() - g.front()) / static_cast<double>(k - 1);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(k - 2, k);
  for (int i = 0; i < k - 2; ++i) {
    const double h0 = (g[i + 1] - g[i]) / mean_gap;
    const double h1 = (g[i + 2] - g[i + 1]) / mean_gap;
    D(i, i) = 1.0 / h0;
    D(i, i + 1) = -(1.0 / h0 + 1.0 / h1);
    D(i, i + 2) = 1.0 / h1;
  }
  return D;
}

Eigen::MatrixXd penalty_matrix(const KnotVector& kv) {
  const auto D = divided_difference_operator(kv);
  return D.transpose() * D;
}

Eigen::MatrixXd sum_to_zero_null_space(const Eigen::RowVectorXd& means) {
  const auto k = means.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(means.transpose());
  const Eigen::MatrixXd Q = qr.householderQ();
  return Q.rightCols(k - 1);
}

SmoothDesign center_smooth(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& penalty) {
  if (basis.cols() < 2) throw Error(ErrorKind::Basis, "centering needs at least two basis columns");
  SmoothDesign sd;
  sd.column_means = basis.colwise().mean();
  sd.constraint_null = sum_to_zero_null_space(sd.column_means);
  sd.basis = basis * sd.constraint_null;
  sd.penalty = sd.constraint_null.transpose() * penalty * sd.constraint_null;
  return sd;
}

}  // namespace gamaudit
