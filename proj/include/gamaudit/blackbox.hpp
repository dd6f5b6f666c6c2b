#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gamaudit/dataset.hpp"
#include "gamaudit/detect.hpp"

namespace gamaudit {

struct StubConfig {
  int hidden = 64;
  int epochs = 30;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 256;
  std::uint64_t seed = 1;
};

// One hidden ReLU layer regressing the label by mean squared error. Inputs
// are standardized with statistics stored in the model.
struct StubModel {
  std::vector<std::string> features;
  ScalingParams scaling;
  Eigen::MatrixXd w1;  // hidden x inputs
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;  // hidden
  double b2 = 0.0;
  StubConfig config;
  double final_loss = 0.0;
};

// `train` in original units. Throws Training when the loss stops being finite.
StubModel train_stub(const Dataset& train, std::span<const std::string> features, const StubConfig& cfg = {});

// Raw network output per row. `ablate` names a feature whose standardized
// value is forced to 0.
std::vector<double> predict_stub(const StubModel& m, const Dataset& d, const std::string& ablate = {});
// Nearest integer, clamped to [0, 4].
double round_score(double prediction);
std::vector<double> predict_scores(const StubModel& m, const Dataset& d, const std::string& ablate = {});

// Share of rows where the rounded score equals the label exactly.
double score_accuracy(std::span<const double> scores, std::span<const double> label);

nlohmann::json to_json(const StubModel& m);
StubModel stub_from_json(const nlohmann::json& j);

struct AuditOptions {
  double eval_fraction = 0.2;
  std::uint64_t seed = 1;
};

// Runs detection with the predictions as target. `inputs.label` must hold
// the predictions. Candidates are ranked by |corr(feature, prediction)| over
// the whole audit set, then the set is split by group.
DetectionReport audit(const Dataset& inputs, const DetectionConfig& cfg, const AuditOptions& options = {});

struct AblationReport {
  std::string feature;
  std::size_t n = 0;
  double accuracy_before = 0.0;
  double accuracy_after = 0.0;
  double majority_frequency = 0.0;  // share of the most frequent gold score
  std::array<std::size_t, 5> histogram_before{};
  std::array<std::size_t, 5> histogram_after{};
  double mode_share_after = 0.0;
  int mode_after = 0;
};

// Throws Prediction when the model has no such input.
AblationReport ablate(const StubModel& m, const Dataset& test, const std::string& feature);
nlohmann::json to_json(const AblationReport& r);

}  // namespace gamaudit
