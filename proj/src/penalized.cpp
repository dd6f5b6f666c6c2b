#include "gamaudit/penalized.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gamaudit/error.hpp"

namespace gamaudit {

namespace {

constexpr double kRankThreshold = 1e-10;

// Shrinks a tall (rows > cols) least-squares problem to square form.
void compress(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double floor_in, Eigen::MatrixXd& r_out,
              Eigen::VectorXd& f_out, double& floor_out) {
  const auto p = a.cols();
  if (a.rows() <= p) {
    r_out = a;
    f_out = b;
    floor_out = floor_in;
    return;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::VectorXd qtb = qr.householderQ().adjoint() * b;
  r_out = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  f_out = qtb.head(p);
  floor_out = floor_in + qtb.tail(a.rows() - p).squaredNorm();
}

}  // namespace

LeastSquaresReduction LeastSquaresReduction::from_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw Error(ErrorKind::Data, "design rows and response length differ");
  LeastSquaresReduction red;
  red.n = static_cast<std::size_t>(x.rows());
  compress(x, y, 0.0, red.r, red.f, red.rss_floor);
  return red;
}

LeastSquaresReduction LeastSquaresReduction::select_columns(std::span<const Eigen::Index> cols) const {
  Eigen::MatrixXd a(r.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) a.col(static_cast<Eigen::Index>(j)) = r.col(cols[j]);
  LeastSquaresReduction red;
  red.n = n;
  compress(a, f, rss_floor, red.r, red.f, red.rss_floor);
  return red;
}

double gcv_score(std::size_t n, double rss, double edf) {
  const double nn = static_cast<double>(n);
  if (nn <= edf) return std::numeric_limits<double>::infinity();
  return nn * rss / ((nn - edf) * (nn - edf));
}

PenalizedSolution solve_penalized(const LeastSquaresReduction& red, std::span<const CoefficientBlock> blocks,
                                  std::span<const double> lambdas) {
  if (lambdas.size() != blocks.size()) throw Error(ErrorKind::Detection, "one smoothing parameter per block required");
  const Eigen::Index p = red.r.cols();

  Eigen::Index penalty_rows = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (lambdas[b] < 0.0) throw Error(ErrorKind::Config, "smoothing parameters must be non-negative");
    if (blocks[b].penalized() && lambdas[b] > 0.0) penalty_rows += blocks[b].root.rows();
  }

  const Eigen::Index top = red.r.rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(top + penalty_rows, p);
  m.topRows(top) = red.r;
  Eigen::Index row = top;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    if (!blk.penalized() || lambdas[b] == 0.0) continue;
    m.block(row, blk.offset, blk.root.rows(), blk.width) = std::sqrt(lambdas[b]) * blk.root;
    row += blk.root.rows();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m.rows());
  rhs.head(top) = red.f;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < p) {
    const Eigen::Index bad = qr.colsPermutation().indices()(qr.rank());
    std::string owner = fmt::format("column {}", bad);
    for (const auto& blk : blocks)
      if (bad >= blk.offset && bad < blk.offset + blk.width) owner = blk.name;
    throw Error(ErrorKind::SingularFit,
                fmt::format("penalized system is rank deficient ({} of {}); offending term '{}'", qr.rank(), p, owner));
  }

  PenalizedSolution sol;
  sol.beta = qr.solve(rhs);
  sol.rss = red.rss_floor + (red.f - red.r * sol.beta).squaredNorm();

  // M P = Q T  =>  (M'M)^-1 = P T^-1 T^-T P'.
  // Influence F = (M'M)^-1 R'R = L G with L = P T^-1 and G = T^-T P' R' R.
  const Eigen::MatrixXd t = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd t_inv =
      t.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd l = qr.colsPermutation() * t_inv;
  const Eigen::MatrixXd rl = red.r * l;  // R P T^-1
  const Eigen::MatrixXd g = rl.transpose() * red.r;
  sol.influence_diag.resize(p);
  for (Eigen::Index i = 0; i < p; ++i) sol.influence_diag(i) = l.row(i).dot(g.col(i));
  sol.edf = sol.influence_diag.sum();
  sol.gcv = gcv_score(red.n, sol.rss, sol.edf);
  return sol;
}

LambdaSearch LambdaSearch::standard() {
  LambdaSearch s;
  for (int e = -6; e <= 6; ++e) s.grid.push_back(std::pow(10.0, e));
  s.sweeps = 2;
  s.initial = 1.0;
  return s;
}

std::vector<double> search_lambdas(const LeastSquaresReduction& red, std::span<const CoefficientBlock> blocks,
                                   const LambdaSearch& search) {
  std::vector<double> lambdas(blocks.size(), 0.0);
  bool any_penalized = false;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].penalized()) {
      lambdas[b] = search.initial;
      any_penalized = true;
    }
  }
  if (!any_penalized || search.grid.empty()) return lambdas;

  auto score = [&](const std::vector<double>& lam) {
    try {
      return solve_penalized(red, blocks, lam).gcv;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::SingularFit) return std::numeric_limits<double>::infinity();
      throw;
    }
  };

  for (int sweep = 0; sweep < search.sweeps; ++sweep) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (!blocks[b].penalized()) continue;
      double best = std::numeric_limits<double>::infinity();
      double best_lambda = lambdas[b];
      for (const double candidate : search.grid) {
        lambdas[b] = candidate;
        const double s = score(lambdas);
        if (s < best) {
          best = s;
          best_lambda = candidate;
        }
      }
      lambdas[b] = best_lambda;
    }
  }
  return lambdas;
}

}  // namespace gamaudit
