#include "gamaudit/gam.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gamaudit/error.hpp"

namespace gamaudit {

using nlohmann::json;

json to_json(const GamConfig& c) {
  return {{"basis_size", c.basis_size},
          {"lambda_grid", c.lambda_search.grid},
          {"sweeps", c.lambda_search.sweeps},
          {"initial_lambda", c.lambda_search.initial}};
}

GamConfig gam_config_from_json(const json& j) {
  GamConfig c;
  c.basis_size = j.at("basis_size").get<int>();
  c.lambda_search.grid = j.at("lambda_grid").get<std::vector<double>>();
  c.lambda_search.sweeps = j.at("sweeps").get<int>();
  c.lambda_search.initial = j.at("initial_lambda").get<double>();
  return c;
}

Eigen::MatrixXd Term::design(std::span<const double> x) const {
  const auto n = static_cast<Eigen::Index>(x.size());
  if (kind == TermKind::Linear) {
    Eigen::MatrixXd out(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) out(i, 0) = x[static_cast<std::size_t>(i)] - center;
    return out;
  }
  return eval_basis(knots, x) * constraint;
}

Term make_term(const Column& column, int basis_size) {
  if (column.values.empty()) throw Error(ErrorKind::Data, fmt::format("feature '{}' has no rows", column.name));
  Term t;
  t.feature = column.name;
  const auto [lo, hi] = std::minmax_element(column.values.begin(), column.values.end());
  t.lower = *lo;
  t.upper = *hi;
  if (column.kind == ColumnKind::Binary) {
    t.kind = TermKind::Linear;
    t.center = mean(column.values);
    return t;
  }
  if (basis_size < kMinBasisSize || basis_size > kMaxBasisSize)
    throw Error(ErrorKind::Config,
                fmt::format("basis size {} outside [{}, {}]", basis_size, kMinBasisSize, kMaxBasisSize));
  t.kind = TermKind::Smooth;
  try {
    t.knots = make_knots(column.values, basis_size);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("feature '{}': {}", column.name, e.what()));
  }
  const auto basis = eval_basis(t.knots, column.values);
  const auto centered = center_smooth(basis, penalty_matrix(t.knots));
  t.constraint = centered.constraint_null;
  t.penalty_root = divided_difference_operator(t.knots) * t.constraint;
  return t;
}

const FittedTerm* FittedGam::find(std::string_view feature) const {
  for (const auto& t : terms)
    if (t.term.feature == feature) return &t;
  return nullptr;
}

const FittedTerm& FittedGam::term(std::string_view feature) const {
  if (const auto* t = find(feature)) return *t;
  throw Error(ErrorKind::Prediction, fmt::format("model has no term for feature '{}'", feature));
}

std::vector<std::string> FittedGam::features() const {
  std::vector<std::string> out;
  for (const auto& t : terms) out.push_back(t.term.feature);
  return out;
}

DesignCache::DesignCache(const Dataset& train, std::span<const std::string> features, const GamConfig& config)
    : label_name_(train.label_name), config_(config) {
  if (train.n_rows() == 0) throw Error(ErrorKind::Data, "cannot fit a model on an empty dataset");
  for (const auto& name : features) {
    if (std::count(features.begin(), features.end(), name) > 1)
      throw Error(ErrorKind::Config, fmt::format("feature '{}' listed twice", name));
    const auto* col = train.find(name);
    if (col == nullptr) throw Error(ErrorKind::Config, fmt::format("training data has no feature '{}'", name));
    terms_.push_back(make_term(*col, config.basis_size));
  }
  const auto n = static_cast<Eigen::Index>(train.n_rows());
  Eigen::Index width = 1;
  for (const auto& t : terms_) {
    offsets_.push_back(width);
    width += t.width();
  }
  design_.resize(n, width);
  design_.col(0).setOnes();
  for (std::size_t i = 0; i < terms_.size(); ++i)
    design_.middleCols(offsets_[i], terms_[i].width()) = terms_[i].design(train.column(terms_[i].feature).values);
  response_ = Eigen::Map<const Eigen::VectorXd>(train.label.data(), n);
  reduction_ = LeastSquaresReduction::from_design(design_, response_);
}

DesignCache::Layout DesignCache::layout(std::span<const std::string> subset) const {
  Layout out;
  out.blocks.push_back(CoefficientBlock{"(intercept)", 0, 1, {}});
  out.columns.push_back(0);
  Eigen::Index offset = 1;
  for (const auto& name : subset) {
    const auto it = std::find_if(terms_.begin(), terms_.end(), [&](const Term& t) { return t.feature == name; });
    if (it == terms_.end()) throw Error(ErrorKind::Config, fmt::format("feature '{}' is not part of the design", name));
    const auto ti = static_cast<std::size_t>(it - terms_.begin());
    out.term_index.push_back(ti);
    CoefficientBlock b{name, offset, it->width(), {}};
    if (it->kind == TermKind::Smooth) b.root = it->penalty_root;
    out.blocks.push_back(std::move(b));
    for (Eigen::Index c = 0; c < it->width(); ++c) out.columns.push_back(offsets_[ti] + c);
    offset += it->width();
  }
  return out;
}

std::vector<double> DesignCache::optimal_lambdas(std::span<const std::string> subset) const {
  const auto lay = layout(subset);
  const auto red = reduction_.select_columns(lay.columns);
  const auto all = search_lambdas(red, lay.blocks, config_.lambda_search);
  return std::vector<double>(all.begin() + 1, all.end());
}

FittedGam DesignCache::fit(std::span<const std::string> subset, std::span<const double> lambdas) const {
  if (lambdas.size() != subset.size())
    throw Error(ErrorKind::Config, fmt::format("{} smoothing parameters for {} features", lambdas.size(), subset.size()));
  const auto lay = layout(subset);
  std::vector<double> block_lambdas{0.0};
  for (std::size_t i = 0; i < subset.size(); ++i)
    block_lambdas.push_back(lay.blocks[i + 1].penalized() ? lambdas[i] : 0.0);

  const auto red = reduction_.select_columns(lay.columns);
  const auto sol = solve_penalized(red, lay.blocks, block_lambdas);

  FittedGam g;
  g.label_name = label_name_;
  g.config = config_;
  g.n_train = n();
  g.intercept = sol.beta(0);
  g.edf_total = sol.edf;

  Eigen::VectorXd fitted = Eigen::VectorXd::Constant(design_.rows(), g.intercept);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& blk = lay.blocks[i + 1];
    const auto ti = lay.term_index[i];
    FittedTerm ft;
    ft.term = terms_[ti];
    ft.coef = sol.beta.segment(blk.offset, blk.width);
    ft.lambda = block_lambdas[i + 1];
    ft.edf = sol.block_edf(blk);
    const Eigen::VectorXd part = design_.middleCols(offsets_[ti], blk.width) * ft.coef;
    ft.shape_sd = sample_sd(std::span<const double>(part.data(), static_cast<std::size_t>(part.size())));
    fitted += part;
    g.terms.push_back(std::move(ft));
  }
  const Eigen::VectorXd resid = response_ - fitted;
  g.rss = resid.squaredNorm();
  g.tss = (response_.array() - response_.mean()).square().sum();
  g.d2_train = g.tss > 0.0 ? 1.0 - g.rss / g.tss : 0.0;
  g.gcv = gcv_score(g.n_train, g.rss, g.edf_total);
  g.fitted_sd = sample_sd(std::span<const double>(fitted.data(), static_cast<std::size_t>(fitted.size())));
  return g;
}

FittedGam DesignCache::fit_optimized(std::span<const std::string> subset) const {
  const auto lambdas = optimal_lambdas(subset);
  return fit(subset, lambdas);
}

FittedGam fit(const Dataset& train, std::span<const std::string> features, std::span<const double> lambdas,
              const GamConfig& config) {
  return DesignCache(train, features, config).fit(features, lambdas);
}

FittedGam optimize_lambdas(const Dataset& train, std::span<const std::string> features, const GamConfig& config) {
  return DesignCache(train, features, config).fit_optimized(features);
}

std::vector<double> predict(const FittedGam& g, const Dataset& d) {
  Eigen::VectorXd yhat = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d.n_rows()), g.intercept);
  for (const auto& t : g.terms) {
    const auto* col = d.find(t.term.feature);
    if (col == nullptr)
      throw Error(ErrorKind::Prediction, fmt::format("prediction data lacks model feature '{}'", t.term.feature));
    yhat += t.evaluate(col->values);
  }
  return std::vector<double>(yhat.data(), yhat.data() + yhat.size());
}

FitMetrics deviance(const FittedGam& g, const Dataset& d) {
  const auto yhat = predict(g, d);
  FitMetrics m;
  const double ybar = mean(d.label);
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    m.deviance += (d.label[i] - yhat[i]) * (d.label[i] - yhat[i]);
    m.null_deviance += (d.label[i] - ybar) * (d.label[i] - ybar);
  }
  if (m.null_deviance > 0.0) m.d2 = 1.0 - m.deviance / m.null_deviance;
  m.edf_total = g.edf_total;
  m.gcv = g.gcv;
  return m;
}

EdfSummary edf(const FittedGam& g) {
  EdfSummary s;
  for (const auto& t : g.terms) s.per_term.emplace_back(t.term.feature, t.edf);
  s.total = g.edf_total;
  return s;
}

FeatureShape shape(const FittedGam& g, std::string_view feature, std::size_t grid_size) {
  const auto& t = g.term(feature);
  grid_size = std::max<std::size_t>(grid_size, 2);
  std::vector<double> z(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i)
    z[i] = t.term.lower + (t.term.upper - t.term.lower) * static_cast<double>(i) / static_cast<double>(grid_size - 1);
  const auto values = t.evaluate(z);

  FeatureShape s;
  s.feature = t.term.feature;
  s.shape_sd = t.shape_sd;
  s.grid.reserve(grid_size);
  for (const double v : z) s.grid.push_back(g.scaling.from_standard(feature, v));
  s.values.assign(values.data(), values.data() + values.size());
  return s;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (j.empty()) return {};
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
  return m;
}

}  // namespace

json to_json(const FittedGam& g) {
  json terms = json::array();
  for (const auto& t : g.terms) {
    json jt = {{"feature", t.term.feature},
               {"kind", t.term.kind == TermKind::Smooth ? "smooth" : "linear"},
               {"lower", t.term.lower},
               {"upper", t.term.upper},
               {"center", t.term.center},
               {"coefficients", std::vector<double>(t.coef.data(), t.coef.data() + t.coef.size())},
               {"lambda", t.lambda},
               {"edf", t.edf},
               {"shape_sd", t.shape_sd}};
    if (t.term.kind == TermKind::Smooth) {
      jt["knots"] = {{"lower", t.term.knots.lower}, {"upper", t.term.knots.upper}, {"interior", t.term.knots.interior}};
      jt["constraint"] = matrix_to_json(t.term.constraint);
      jt["penalty_root"] = matrix_to_json(t.term.penalty_root);
    }
    terms.push_back(std::move(jt));
  }
  return {{"family", "gaussian"},
          {"link", "identity"},
          {"label", g.label_name},
          {"basis", {{"type", "cubic B-spline"}, {"knots", "quantiles of distinct values"},
                     {"penalty", "second-order divided differences"}}},
          {"config", to_json(g.config)},
          {"intercept", g.intercept},
          {"scaling", to_json(g.scaling)},
          {"n_train", g.n_train},
          {"rss", g.rss},
          {"tss", g.tss},
          {"d2_train", g.d2_train},
          {"edf_total", g.edf_total},
          {"gcv", g.gcv},
          {"fitted_sd", g.fitted_sd},
          {"terms", std::move(terms)}};
}

FittedGam gam_from_json(const json& j) {
  try {
    FittedGam g;
    g.label_name = j.at("label");
    g.config = gam_config_from_json(j.at("config"));
    g.intercept = j.at("intercept");
    g.scaling = scaling_from_json(j.at("scaling"));
    g.n_train = j.at("n_train");
    g.rss = j.at("rss");
    g.tss = j.at("tss");
    g.d2_train = j.at("d2_train");
    g.edf_total = j.at("edf_total");
    g.gcv = j.at("gcv");
    g.fitted_sd = j.at("fitted_sd");
    for (const auto& jt : j.at("terms")) {
      FittedTerm ft;
      ft.term.feature = jt.at("feature");
      ft.term.kind = jt.at("kind") == "smooth" ? TermKind::Smooth : TermKind::Linear;
      ft.term.lower = jt.at("lower");
      ft.term.upper = jt.at("upper");
      ft.term.center = jt.at("center");
      if (ft.term.kind == TermKind::Smooth) {
        const auto& k = jt.at("knots");
        ft.term.knots.lower = k.at("lower");
        ft.term.knots.upper = k.at("upper");
        ft.term.knots.interior = k.at("interior").get<std::vector<double>>();
        ft.term.constraint = matrix_from_json(jt.at("constraint"));
        ft.term.penalty_root = matrix_from_json(jt.at("penalty_root"));
      }
      const auto coef = jt.at("coefficients").get<std::vector<double>>();
      ft.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
      if (ft.coef.size() != ft.term.width())
        throw Error(ErrorKind::Parse, fmt::format("term '{}' coefficient count mismatch", ft.term.feature));
      ft.lambda = jt.at("lambda");
      ft.edf = jt.at("edf");
      ft.shape_sd = jt.at("shape_sd");
      g.terms.push_back(std::move(ft));
    }
    return g;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("malformed model file: {}", e.what()));
  }
}

}  // namespace gamaudit
