#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gamaudit/dataset.hpp"

namespace gamaudit {

enum class Direction { Ascending, Descending };

// Scores are listed per interval in increasing-x order:
//   (-inf, cuts[0]), [cuts[0], cuts[1]), ..., [cuts.back(), +inf)
// An ascending table has non-decreasing scores, a descending one
// non-increasing scores.
struct ThresholdTable {
  std::vector<double> cuts;
  std::vector<int> scores;
  Direction direction = Direction::Ascending;

  void validate() const;  // throws Rule
};

int eval_step(double x, const ThresholdTable& t);

struct Rule;
using RulePtr = std::shared_ptr<const Rule>;

struct StepRule {
  std::string feature;
  ThresholdTable table;
};
struct MaxRule {
  std::vector<RulePtr> children;
};
// Children must evaluate to 0 or 1.
struct ProductRule {
  std::vector<RulePtr> children;
};
struct GreaterEqRule {
  RulePtr operand;
  double bound = 0.0;
};
struct FeatureRule {
  std::string feature;
};

struct Rule {
  std::variant<StepRule, MaxRule, ProductRule, GreaterEqRule, FeatureRule> node;
};

RulePtr step(std::string feature, ThresholdTable table);
RulePtr max_of(std::vector<RulePtr> children);
RulePtr product_of(std::vector<RulePtr> children);
RulePtr greater_eq(RulePtr operand, double bound);
RulePtr feature_value(std::string feature);

using FeatureLookup = std::function<double(std::string_view)>;

// lookup throws (or the rule throws Rule) when a feature is missing.
double eval_rule(const Rule& rule, const FeatureLookup& lookup);
// Evaluates the rule on every row of d.
std::vector<double> label_rows(const Rule& rule, const Dataset& d);
// Distinct referenced features in first-appearance order.
std::vector<std::string> referenced_features(const Rule& rule);

nlohmann::json to_json(const Rule& rule);
RulePtr rule_from_json(const nlohmann::json& j);  // throws Rule

enum class Transform {
  Identity,   // eta
  Lognormal,  // exp(eta)
  Integer,    // round(eta), clamped to [min, max]
  Indicator,  // the row's infection state; a binary column
  Banded,     // eta picks a band, the value is drawn inside that band
};

// Truncated normal inside [lower, upper].
struct Band {
  double center = 0.0;
  double spread = 1.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// eta = intercept + severity_loading * s + infection_loading * inf + noise_sd * z
struct FeatureSpec {
  std::string name;
  double intercept = 0.0;
  double severity_loading = 0.0;
  double infection_loading = 0.0;
  double noise_sd = 1.0;
  Transform transform = Transform::Identity;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
  // Banded: cuts on (eta - intercept) / sqrt(severity_loading^2 + noise_sd^2),
  // one more band than cuts.
  std::vector<double> band_cuts;
  std::vector<Band> bands;
};

struct GenConfig {
  std::string name;
  std::uint64_t seed = 1;
  std::size_t n_patients = 620;
  std::size_t rows_min = 60;
  std::size_t rows_max = 140;
  // Weight of the patient-level severity in each row's severity; the rest is
  // row-level noise, so severity stays N(0, 1) marginally.
  double patient_share = 0.9;
  // Probability that a patient acquires an infection; rows from a uniformly
  // drawn onset row onward are infected.
  double infection_rate = 0.174;
  std::string label_name = "label";
  std::string group_name = "pid";
  std::vector<FeatureSpec> features;
  RulePtr rule;

  void validate() const;  // throws Generation or Rule
};

nlohmann::json to_json(const GenConfig& c);
// Unknown keys are rejected.
GenConfig gen_config_from_json(const nlohmann::json& j);
GenConfig load_gen_config(const std::string& path);

// Deterministic per seed. Labels are exactly label_rows(rule, features).
Dataset generate(const GenConfig& c);

// "liver", "kidney" or "sepsis".
GenConfig default_config(std::string_view name);

}  // namespace gamaudit
