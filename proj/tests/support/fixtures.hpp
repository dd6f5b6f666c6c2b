#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gamaudit/dataset.hpp"
#include "gamaudit/gam.hpp"
#include "gamaudit/rng.hpp"

namespace fixture {

// Continuous features x0..x{p-1} ~ N(0,1), label = sin(2 x0) + 0.5 x1^2 + noise.
inline gamaudit::Dataset smooth_data(std::size_t n, std::size_t p, std::uint64_t seed, double noise = 0.3) {
  gamaudit::Rng rng(seed);
  gamaudit::Dataset d;
  for (std::size_t j = 0; j < p; ++j) d.columns.push_back({"x" + std::to_string(j), {}, gamaudit::ColumnKind::Continuous});
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& c : d.columns) c.values.push_back(rng.normal());
    double y = std::sin(2.0 * d.columns[0].values.back());
    if (p > 1) y += 0.5 * d.columns[1].values.back() * d.columns[1].values.back();
    d.label.push_back(y + noise * rng.normal());
    d.group_id.push_back(static_cast<std::int64_t>(i));
  }
  return d;
}

// Label independent of every feature.
inline gamaudit::Dataset noise_data(std::size_t n, std::size_t p, std::uint64_t seed) {
  auto d = smooth_data(n, p, seed);
  gamaudit::Rng rng(seed + 1000);
  for (auto& y : d.label) y = rng.normal();
  return d;
}

// Full design [1 | term designs] of a fitted model evaluated on d.
inline Eigen::MatrixXd design_of(const gamaudit::FittedGam& g, const gamaudit::Dataset& d) {
  Eigen::Index p = 1;
  for (const auto& t : g.terms) p += t.term.width();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.n_rows()), p);
  x.col(0).setOnes();
  Eigen::Index off = 1;
  for (const auto& t : g.terms) {
    x.middleCols(off, t.term.width()) = t.term.design(d.column(t.term.feature).values);
    off += t.term.width();
  }
  return x;
}

// Block-diagonal penalty sum_j lambda_j P_j' P_j aligned with design_of.
inline Eigen::MatrixXd penalty_of(const gamaudit::FittedGam& g) {
  Eigen::Index p = 1;
  for (const auto& t : g.terms) p += t.term.width();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
  Eigen::Index off = 1;
  for (const auto& t : g.terms) {
    const auto w = t.term.width();
    if (t.term.kind == gamaudit::TermKind::Smooth)
      s.block(off, off, w, w) = t.lambda * t.term.penalty_root.transpose() * t.term.penalty_root;
    off += w;
  }
  return s;
}

inline Eigen::VectorXd label_vector(const gamaudit::Dataset& d) {
  return Eigen::Map<const Eigen::VectorXd>(d.label.data(), static_cast<Eigen::Index>(d.label.size()));
}

}  // namespace fixture
