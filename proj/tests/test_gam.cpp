#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "gamaudit/error.hpp"
#include "gamaudit/gam.hpp"
#include "gamaudit/penalized.hpp"
#include "gamaudit/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace gamaudit;

namespace {

const std::vector<std::string> kX01{"x0", "x1"};

GamConfig basis(int k) {
  GamConfig c;
  c.basis_size = k;
  return c;
}

}  // namespace

TEST_CASE("unpenalized solve equals the normal equations on a 10x3 system") {
  Rng rng(1);
  Eigen::MatrixXd x(10, 3);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    x(i, 2) = rng.normal();
    y(i) = 2.0 - x(i, 1) + 0.5 * x(i, 2) + 0.1 * rng.normal();
  }
  const auto red = LeastSquaresReduction::from_design(x, y);
  const std::vector<CoefficientBlock> blocks{{"all", 0, 3, {}}};
  const auto sol = solve_penalized(red, blocks, std::vector<double>{0.0});
  const Eigen::VectorXd ref = oracle::ols(x, y);
  CHECK((sol.beta - ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(sol.rss == doctest::Approx((y - x * ref).squaredNorm()).epsilon(1e-10));
  CHECK(sol.edf == doctest::Approx(3.0).epsilon(1e-10));

  // Column subsets from the shared reduction match a fresh reduction.
  const std::vector<Eigen::Index> cols{0, 2};
  const auto sub = red.select_columns(cols);
  const std::vector<CoefficientBlock> b2{{"sub", 0, 2, {}}};
  const auto s2 = solve_penalized(sub, b2, std::vector<double>{0.0});
  Eigen::MatrixXd x2(10, 2);
  x2 << x.col(0), x.col(2);
  CHECK((s2.beta - oracle::ols(x2, y)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gcv score") {
  CHECK(gcv_score(100, 50.0, 10.0) == doctest::Approx(100.0 * 50.0 / (90.0 * 90.0)));
  CHECK(std::isinf(gcv_score(10, 1.0, 10.0)));
}

TEST_CASE("exact linear data is reproduced at any lambda") {
  Rng rng(2);
  Dataset d;
  d.columns.push_back({"x0", {}, ColumnKind::Continuous});
  for (int i = 0; i < 300; ++i) {
    d.columns[0].values.push_back(rng.normal());
    d.label.push_back(1.5 + 0.7 * d.columns[0].values.back());
    d.group_id.push_back(i);
  }
  const std::vector<std::string> f{"x0"};
  const double var = sample_sd(d.label) * sample_sd(d.label);
  for (double lambda : {1e-6, 1.0, 1e6}) {
    const auto g = fit(d, f, std::vector<double>{lambda});
    CHECK(g.rss / (300.0 * var) < 1e-16);
  }
}

TEST_CASE("empty feature set gives the intercept-only model") {
  const auto d = standardize(fixture::smooth_data(200, 1, 3)).first;
  const auto g = fit(d, {}, {});
  CHECK(g.intercept == doctest::Approx(mean(d.label)).epsilon(1e-12));
  const auto m = deviance(g, d);
  REQUIRE(m.d2);
  CHECK(std::abs(*m.d2) < 1e-12);
  CHECK(m.edf_total == doctest::Approx(1.0));
}

TEST_CASE("deviance examples") {
  Dataset d;
  d.columns.push_back({"x0", {0, 1, 2, 3, 4, 5}, ColumnKind::Continuous});
  d.label = {0, 1, 2, 3, 4, 5};
  d.group_id = {1, 2, 3, 4, 5, 6};
  const auto g = fit(d, std::vector<std::string>{"x0"}, std::vector<double>{1.0}, basis(4));
  const auto m = deviance(g, d);
  REQUIRE(m.d2);
  CHECK(*m.d2 == doctest::Approx(1.0).epsilon(1e-12));

  Dataset flat = d;
  flat.label.assign(6, 2.0);
  CHECK_FALSE(deviance(g, flat).d2.has_value());
}

TEST_CASE("edf limits and hat-matrix trace") {
  const auto d = standardize(fixture::smooth_data(30, 2, 4)).first;
  const auto cfg = basis(6);
  const auto g0 = fit(d, kX01, std::vector<double>{0.0, 0.0}, cfg);
  for (const auto& t : g0.terms) CHECK(t.edf == doctest::Approx(5.0).epsilon(1e-6));
  const auto gi = fit(d, kX01, std::vector<double>{1e12, 1e12}, cfg);
  for (const auto& t : gi.terms) CHECK(std::abs(t.edf - 1.0) <= 0.01);

  for (double lambda : {0.01, 0.7, 30.0}) {
    const auto g = fit(d, kX01, std::vector<double>{lambda, 2.0 * lambda}, cfg);
    const auto x = fixture::design_of(g, d);
    const auto h = oracle::hat_matrix(x, fixture::penalty_of(g));
    CHECK(std::abs(h.trace() - g.edf_total) < 1e-8);
    const auto e = edf(g);
    CHECK(e.total == doctest::Approx(g.edf_total));
    CHECK(e.per_term.size() == 2);
    CHECK(g.edf_total >= 1.0);
    CHECK(g.edf_total <= 11.0);
  }
}

TEST_CASE("per-smooth edf does not increase with lambda") {
  const auto d = standardize(fixture::smooth_data(300, 1, 5)).first;
  const std::vector<std::string> f{"x0"};
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : LambdaSearch::standard().grid) {
    const auto g = fit(d, f, std::vector<double>{lambda});
    CHECK(g.terms[0].edf <= prev + 1e-9);
    prev = g.terms[0].edf;
  }
}

TEST_CASE("lambda = 0 matches OLS on the same design") {
  const auto d = standardize(fixture::smooth_data(150, 2, 6)).first;
  const auto g = fit(d, kX01, std::vector<double>{0.0, 0.0}, basis(7));
  const auto x = fixture::design_of(g, d);
  const Eigen::VectorXd ref = x * oracle::ols(x, fixture::label_vector(d));
  const auto yhat = predict(g, d);
  for (std::size_t i = 0; i < yhat.size(); ++i) CHECK(std::abs(yhat[i] - ref(static_cast<Eigen::Index>(i))) < 1e-8);
}

TEST_CASE("coordinate descent matches exhaustive grid search") {
  const auto d = standardize(fixture::smooth_data(300, 2, 7, 0.8)).first;
  const DesignCache cache(d, kX01, GamConfig{});
  const auto cd = cache.optimal_lambdas(kX01);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> arg;
  for (double a : LambdaSearch::standard().grid)
    for (double b : LambdaSearch::standard().grid) {
      const std::vector<double> l{a, b};
      const double s = cache.fit(kX01, l).gcv;
      if (s < best) {
        best = s;
        arg = l;
      }
    }
  CHECK(cd == arg);
}

namespace {

std::vector<double> noise_edfs() {
  std::vector<double> out;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto d = standardize(fixture::noise_data(400, 1, seed)).first;
    out.push_back(optimize_lambdas(d, std::vector<std::string>{"x0"}).terms[0].edf);
  }
  return out;
}

}  // namespace

TEST_CASE("pure noise: edf at most 1.5 on 90% of seeds") {
  const auto e = noise_edfs();
  const auto flat = std::count_if(e.begin(), e.end(), [](double v) { return v <= 1.5; });
  MESSAGE("seeds with edf <= 1.5: " << flat << " of 20");
  CHECK(flat >= 18);
}

TEST_CASE("pure noise: median edf at most 1.5") {
  auto e = noise_edfs();
  std::sort(e.begin(), e.end());
  CHECK(e[e.size() / 2] <= 1.5);
}

TEST_CASE("nested models never lose training fit") {
  const auto d = standardize(fixture::smooth_data(300, 3, 8)).first;
  const auto a = fit(d, std::vector<std::string>{"x2"}, std::vector<double>{0.0});
  const auto b = fit(d, std::vector<std::string>{"x2", "x0"}, std::vector<double>{0.0, 0.0});
  const auto c = fit(d, std::vector<std::string>{"x2", "x0", "x1"}, std::vector<double>{0.0, 0.0, 0.0});
  CHECK(a.d2_train <= b.d2_train + 1e-12);
  CHECK(b.d2_train <= c.d2_train + 1e-12);
}

TEST_CASE("fits are deterministic") {
  const auto d = standardize(fixture::smooth_data(300, 2, 9)).first;
  const auto a = optimize_lambdas(d, kX01);
  const auto b = optimize_lambdas(d, kX01);
  CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("prediction") {
  const auto [d, scaling] = standardize(fixture::smooth_data(400, 2, 10));
  auto g = optimize_lambdas(d, kX01);
  const auto yhat = predict(g, d);
  double rss = 0.0;
  for (std::size_t i = 0; i < yhat.size(); ++i) rss += (d.label[i] - yhat[i]) * (d.label[i] - yhat[i]);
  CHECK(rss == doctest::Approx(g.rss).epsilon(1e-10));

  // Values outside the training range evaluate like the nearest boundary.
  Dataset far = d.select_rows(std::vector<std::size_t>{0, 1});
  Dataset edge = far;
  far.columns[0].values = {g.terms[0].term.upper + 10.0, g.terms[0].term.lower - 10.0};
  edge.columns[0].values = {g.terms[0].term.upper, g.terms[0].term.lower};
  CHECK(predict(g, far) == predict(g, edge));

  // Zeroed coefficients predict the intercept.
  auto z = g;
  for (auto& t : z.terms) t.coef.setZero();
  for (double v : predict(z, d)) CHECK(v == g.intercept);

  Dataset missing = d;
  missing.columns.pop_back();
  try {
    predict(g, missing);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Prediction);
  }
}

TEST_CASE("model JSON round trip predicts identically") {
  const auto [d, scaling] = standardize(fixture::smooth_data(300, 2, 12));
  auto g = optimize_lambdas(d, kX01);
  g.scaling = scaling;
  const auto back = gam_from_json(nlohmann::json::parse(to_json(g).dump()));
  CHECK(predict(back, d) == predict(g, d));
  CHECK(to_json(back).dump() == to_json(g).dump());
}

TEST_CASE("binary features enter as a centered line") {
  Rng rng(13);
  Dataset d;
  d.columns.push_back({"flag", {}, ColumnKind::Binary});
  for (int i = 0; i < 200; ++i) {
    const double b = rng.bernoulli(0.3) ? 1.0 : 0.0;
    d.columns[0].values.push_back(b);
    d.label.push_back(2.0 * b + 0.1 * rng.normal());
    d.group_id.push_back(i);
  }
  const auto g = optimize_lambdas(d, std::vector<std::string>{"flag"});
  REQUIRE(g.terms[0].term.kind == TermKind::Linear);
  CHECK(g.terms[0].edf == doctest::Approx(1.0).epsilon(1e-10));
  const auto s = shape(g, "flag", 2);
  REQUIRE(s.values.size() == 2);
  CHECK(s.values[1] - s.values[0] == doctest::Approx(g.terms[0].coef(0)).epsilon(1e-12));
  CHECK(g.terms[0].coef(0) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("shapes are reported in original units") {
  const auto raw = fixture::smooth_data(400, 1, 14);
  auto [d, scaling] = standardize(raw);
  auto g = optimize_lambdas(d, std::vector<std::string>{"x0"});
  g.scaling = scaling;
  const auto s = shape(g, "x0", 50);
  REQUIRE(s.grid.size() == 50);
  const auto [lo, hi] = std::minmax_element(raw.columns[0].values.begin(), raw.columns[0].values.end());
  CHECK(s.grid.front() == doctest::Approx(*lo).epsilon(1e-10));
  CHECK(s.grid.back() == doctest::Approx(*hi).epsilon(1e-10));
  CHECK(std::is_sorted(s.grid.begin(), s.grid.end()));
  CHECK(s.shape_sd == doctest::Approx(g.terms[0].shape_sd));
}

TEST_CASE("duplicated columns make the fit singular and name a term") {
  auto d = standardize(fixture::smooth_data(200, 1, 15)).first;
  d.columns.push_back({"x0_copy", d.columns[0].values, ColumnKind::Continuous});
  try {
    fit(d, std::vector<std::string>{"x0", "x0_copy"}, std::vector<double>{0.0, 0.0});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularFit);
    CHECK(std::string(e.what()).find("x0") != std::string::npos);
  }
}

TEST_CASE("penalized objective is minimal at the returned coefficients") {
  const auto d = standardize(fixture::smooth_data(200, 2, 16)).first;
  const auto g = fit(d, kX01, std::vector<double>{0.5, 20.0}, basis(8));
  const auto x = fixture::design_of(g, d);
  const auto s = fixture::penalty_of(g);
  const Eigen::VectorXd y = fixture::label_vector(d);
  Eigen::VectorXd beta(x.cols());
  beta(0) = g.intercept;
  Eigen::Index off = 1;
  for (const auto& t : g.terms) {
    beta.segment(off, t.coef.size()) = t.coef;
    off += t.coef.size();
  }
  const auto objective = [&](const Eigen::VectorXd& b) { return (y - x * b).squaredNorm() + b.dot(s * b); };
  const double at = objective(beta);
  Rng rng(17);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd p = beta;
    const double scale = 1e-3 * std::pow(10.0, i % 4);
    for (Eigen::Index j = 0; j < p.size(); ++j) p(j) += scale * rng.normal();
    if (objective(p) < at - 1e-10 * at) ++violations;
  }
  CHECK(violations == 0);
}
