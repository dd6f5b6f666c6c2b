#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gamaudit {

// Compressed least-squares problem: for any beta,
//   ||y - X beta||^2 == ||f - R beta||^2 + rss_floor
// with R having as many columns as X. Built once per design by QR so that
// repeated penalized solves cost O(p^3) instead of O(n p^2).
struct LeastSquaresReduction {
  Eigen::MatrixXd r;
  Eigen::VectorXd f;
  double rss_floor = 0.0;
  std::size_t n = 0;

  static LeastSquaresReduction from_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  // Reduction of the column subset X[:, cols], derived from this one without
  // touching the original rows.
  LeastSquaresReduction select_columns(std::span<const Eigen::Index> cols) const;
};

// A contiguous block of coefficients sharing one smoothing parameter.
// `root` is P with P'P = S for penalized blocks; empty for unpenalized ones.
struct CoefficientBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index width = 0;
  Eigen::MatrixXd root;

  bool penalized() const { return root.size() > 0; }
};

struct PenalizedSolution {
  Eigen::VectorXd beta;
  double rss = 0.0;
  Eigen::VectorXd influence_diag;  // diagonal of (X'X + L)^-1 X'X
  double edf = 0.0;
  double gcv = 0.0;

  double block_edf(const CoefficientBlock& b) const { return influence_diag.segment(b.offset, b.width).sum(); }
};

// Minimizes ||y - X beta||^2 + sum_j lambda_j beta_j' S_j beta_j through a
// column-pivoted QR of [R; sqrt(lambda_j) P_j]. Throws SingularFit naming the
// block of the first dependent column.
PenalizedSolution solve_penalized(const LeastSquaresReduction& red, std::span<const CoefficientBlock> blocks,
                                  std::span<const double> lambdas);

// n * RSS / (n - edf)^2, +inf when n <= edf.
double gcv_score(std::size_t n, double rss, double edf);

struct LambdaSearch {
  std::vector<double> grid;  // ascending
  int sweeps = 2;
  double initial = 1.0;

  static LambdaSearch standard();  // 1e-6, 1e-5, ..., 1e6
};

// Cyclic coordinate descent over the grid for each penalized block in order;
// ties resolve to the smaller lambda. Unpenalized blocks keep lambda = 0.
std::vector<double> search_lambdas(const LeastSquaresReduction& red, std::span<const CoefficientBlock> blocks,
                                   const LambdaSearch& search);

}  // namespace gamaudit
