#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gamaudit/dataset.hpp"
#include "gamaudit/gam.hpp"

namespace gamaudit {

struct DetectionConfig {
  double d2_threshold = 0.95;           // delta
  double d2_tie_window = 0.005;         // epsilon
  double nullification_threshold = 0.05;  // tau
  std::size_t max_candidates = 5;
  GamConfig gam;
  unsigned workers = 0;  // 0 = hardware concurrency

  void validate() const;  // throws Config
};

nlohmann::json to_json(const DetectionConfig& c);

// Features joined in candidate order with " + ".
std::string subset_name(std::span<const std::string> features);

struct RankedModel {
  std::vector<std::string> features;
  std::string name;
  double d2 = 0.0;  // evaluation set
  double d2_train = 0.0;
  double edf = 0.0;  // training fit
  std::size_t rank = 0;
  bool failed = false;
  std::string diagnostic;
};

// Repeatedly takes the not-yet-ranked models whose D^2 is within epsilon of
// the best remaining D^2 and emits the one with the smallest edf (then name).
// Failed models go last, by name. Output is independent of input order.
std::vector<RankedModel> rank_models(std::vector<RankedModel> models, double epsilon);

struct Step1Result {
  std::vector<RankedModel> ranked;
  std::optional<std::vector<std::string>> defining;
};

// `train` and `eval` must already be on the model scale.
Step1Result step1_search(const Dataset& train, const Dataset& eval, const CandidateSet& cand,
                         const DetectionConfig& cfg);

// sd of f_j over the training rows relative to sd of the fitted values;
// empty when the fitted values are constant.
std::optional<double> nullification_score(const FittedGam& g, std::string_view feature);

struct NullificationScore {
  std::string feature;
  bool defining = false;
  std::optional<double> score;
};

struct ModelSummary {
  FittedGam model;
  std::vector<std::string> features;
  double d2 = 0.0;  // evaluation set
  double edf = 0.0;
  std::vector<FeatureShape> shapes;
};

struct Step2Result {
  std::vector<NullificationScore> scores;  // defining features first, then candidate order
  bool confirmed = false;
  ModelSummary extended;
  std::optional<ModelSummary> defining_free;  // absent when every candidate is defining
};

// `scaling` is attached to the fitted models so shapes come out in original units.
Step2Result step2_nullify(const Dataset& train, const Dataset& eval, std::span<const std::string> defining,
                          const CandidateSet& cand, const DetectionConfig& cfg, const ScalingParams& scaling = {});

struct DetectionReport {
  std::string target;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  CandidateSet candidates;
  DetectionConfig config;
  ScalingParams scaling;
  Step1Result step1;
  std::optional<Step2Result> step2;
};

// Full pipeline on original-unit data: standardizes with training statistics,
// ranks candidates against the training label unless `candidates` is given,
// then runs both steps.
DetectionReport detect(const Dataset& train, const Dataset& eval, const DetectionConfig& cfg,
                       std::optional<CandidateSet> candidates = std::nullopt);

nlohmann::json to_json(const DetectionReport& r);
// Text table with one row per subset: rank, features, D^2, edf.
std::string to_text(const DetectionReport& r);

}  // namespace gamaudit
