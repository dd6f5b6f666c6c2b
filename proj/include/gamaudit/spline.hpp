#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gamaudit {

inline constexpr int kSplineDegree = 3;
inline constexpr int kMinBasisSize = 4;
inline constexpr int kMaxBasisSize = 30;

// Clamped cubic knot sequence: boundary knots repeated degree+1 times.
struct KnotVector {
  std::vector<double> interior;  // strictly ascending, inside (lower, upper)
  double lower = 0.0;
  double upper = 1.0;

  int num_basis() const { return static_cast<int>(interior.size()) + kSplineDegree + 1; }
  // Full knot sequence of length num_basis() + degree + 1.
  std::vector<double> full() const;
};

// Interior knots at the i/(k-3) quantiles (i = 1..k-4) of the distinct values,
// boundary knots at min/max. k is reduced to the number of distinct values
// when there are fewer; fewer than 4 distinct values is a basis error.
KnotVector make_knots(std::span<const double> values, int k);

// n x k matrix of cubic B-spline values; inputs outside the boundary knots
// are clamped onto them. Every row sums to one.
Eigen::MatrixXd eval_basis(const KnotVector& kv, std::span<const double> x);

// (k-2) x k second-order difference operator and S = D'D.
Eigen::MatrixXd difference_operator(int k);
Eigen::MatrixXd penalty_matrix(int k);

// Knot averages t_{i+1..i+3}/3; the coefficients of the identity function.
std::vector<double> greville_abscissae(const KnotVector& kv);

// Second-order divided differences of the coefficients taken over the
// Greville abscissae, rescaled by the mean spacing so that it coincides with
// difference_operator(k) on evenly spaced abscissae. Its null space is exactly
// the straight lines in x.
Eigen::MatrixXd divided_difference_operator(const KnotVector& kv);
Eigen::MatrixXd penalty_matrix(const KnotVector& kv);

// Sum-to-zero reparameterization of a smooth over the data it was built on.
struct SmoothDesign {
  std::string feature;
  Eigen::MatrixXd basis;            // n x (k-1), column means zero
  Eigen::MatrixXd penalty;          // (k-1) x (k-1), Z' S Z
  Eigen::MatrixXd constraint_null;  // k x (k-1) matrix Z with means * Z = 0
  Eigen::RowVectorXd column_means;  // data means of the raw basis columns
};

// Z spans the orthogonal complement of the constraint vector `means`.
Eigen::MatrixXd sum_to_zero_null_space(const Eigen::RowVectorXd& means);

SmoothDesign center_smooth(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& penalty);

}  // namespace gamaudit
