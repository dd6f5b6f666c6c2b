#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamaudit/dataset.hpp"
#include "gamaudit/penalized.hpp"
#include "gamaudit/spline.hpp"

namespace gamaudit {

struct GamConfig {
  int basis_size = 20;
  LambdaSearch lambda_search = LambdaSearch::standard();
};

nlohmann::json to_json(const GamConfig& c);
GamConfig gam_config_from_json(const nlohmann::json& j);

enum class TermKind { Smooth, Linear };

// Recipe turning one feature column into design columns. Smooth terms are
// centered cubic splines; binary features enter as one centered linear column
// with no penalty.
struct Term {
  std::string feature;
  TermKind kind = TermKind::Smooth;
  KnotVector knots;
  Eigen::MatrixXd constraint;    // k x (k-1)
  Eigen::MatrixXd penalty_root;  // (k-2) x (k-1)
  double center = 0.0;           // linear terms: training mean
  double lower = 0.0;            // training range on the model scale
  double upper = 0.0;

  Eigen::Index width() const { return kind == TermKind::Linear ? 1 : constraint.cols(); }
  Eigen::MatrixXd design(std::span<const double> x) const;
};

Term make_term(const Column& column, int basis_size);

struct FittedTerm {
  Term term;
  Eigen::VectorXd coef;
  double lambda = 0.0;
  double edf = 0.0;
  double shape_sd = 0.0;  // sd of f_j(x_j) over the training rows

  // Partial prediction f_j(x) on the model (standardized) scale.
  Eigen::VectorXd evaluate(std::span<const double> x) const { return term.design(x) * coef; }
};

struct FittedGam {
  std::string label_name;
  double intercept = 0.0;
  std::vector<FittedTerm> terms;
  ScalingParams scaling;
  GamConfig config;
  std::size_t n_train = 0;
  double rss = 0.0;
  double tss = 0.0;
  double d2_train = 0.0;
  double edf_total = 1.0;
  double gcv = 0.0;
  double fitted_sd = 0.0;

  const FittedTerm* find(std::string_view feature) const;
  const FittedTerm& term(std::string_view feature) const;  // throws Prediction
  std::vector<std::string> features() const;
};

struct FitMetrics {
  double deviance = 0.0;       // residual sum of squares (sigma^2 = 1)
  double null_deviance = 0.0;  // sum of squares about the evaluation mean
  std::optional<double> d2;    // empty when the null deviance is zero
  double edf_total = 0.0;
  double gcv = 0.0;
};

struct EdfSummary {
  std::vector<std::pair<std::string, double>> per_term;
  double total = 0.0;
};

struct FeatureShape {
  std::string feature;
  std::vector<double> grid;    // original units, ascending
  std::vector<double> values;  // f_j on the grid
  double shape_sd = 0.0;
};

// Features + response pre-assembled as one design so that any subset can be
// fitted from a shared QR reduction. Column 0 is the intercept.
class DesignCache {
 public:
  DesignCache(const Dataset& train, std::span<const std::string> features, const GamConfig& config);

  const std::vector<Term>& terms() const { return terms_; }
  std::size_t n() const { return static_cast<std::size_t>(design_.rows()); }

  FittedGam fit(std::span<const std::string> subset, std::span<const double> lambdas) const;
  FittedGam fit_optimized(std::span<const std::string> subset) const;
  std::vector<double> optimal_lambdas(std::span<const std::string> subset) const;

 private:
  struct Layout {
    std::vector<std::size_t> term_index;
    std::vector<CoefficientBlock> blocks;  // intercept first
    std::vector<Eigen::Index> columns;
  };
  Layout layout(std::span<const std::string> subset) const;

  std::string label_name_;
  GamConfig config_;
  std::vector<Term> terms_;
  std::vector<Eigen::Index> offsets_;
  Eigen::MatrixXd design_;
  Eigen::VectorXd response_;
  LeastSquaresReduction reduction_;
};

// Penalized fit at fixed smoothing parameters (one per feature, ignored for
// binary features). `train` is on the model scale; an empty feature list
// yields the intercept-only model.
FittedGam fit(const Dataset& train, std::span<const std::string> features, std::span<const double> lambdas,
              const GamConfig& config = {});
// GCV-selected smoothing parameters, then the final fit.
FittedGam optimize_lambdas(const Dataset& train, std::span<const std::string> features, const GamConfig& config = {});

std::vector<double> predict(const FittedGam& g, const Dataset& d);
FitMetrics deviance(const FittedGam& g, const Dataset& d);
EdfSummary edf(const FittedGam& g);
FeatureShape shape(const FittedGam& g, std::string_view feature, std::size_t grid_size = 200);

nlohmann::json to_json(const FittedGam& g);
FittedGam gam_from_json(const nlohmann::json& j);

}  // namespace gamaudit
