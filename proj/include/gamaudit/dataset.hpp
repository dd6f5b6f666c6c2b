#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace gamaudit {

// Search-space guard on candidate sets: 2^8 - 1 = 255 subset fits.
inline constexpr std::size_t kMaxCandidates = 8;

enum class ColumnKind { Continuous, Binary };

const char* to_string(ColumnKind kind);

struct Column {
  std::string name;
  std::vector<double> values;
  ColumnKind kind = ColumnKind::Continuous;
};

// Feature matrix stored column-wise, plus the label and a group (patient) id
// per row. Features never include the label or group columns.
struct Dataset {
  std::vector<Column> columns;
  std::string label_name = "label";
  std::vector<double> label;
  std::string group_name = "pid";
  std::vector<std::int64_t> group_id;

  std::size_t n_rows() const { return label.size(); }

  bool has_column(std::string_view name) const { return find(name) != nullptr; }
  const Column* find(std::string_view name) const;
  Column* find(std::string_view name);
  // Throws ErrorKind::Prediction when absent.
  const Column& column(std::string_view name) const;
  std::vector<std::string> feature_names() const;

  Dataset select_rows(std::span<const std::size_t> rows) const;
  // Checks the length/binary/finiteness invariants; throws ErrorKind::Data.
  void validate() const;
};

struct LoadOptions {
  std::string label_name;
  // Empty: no group column, every row is its own group.
  std::string group_name = "pid";
  // When false a missing label column is tolerated and the label is zero-filled.
  bool require_label = true;
  // Columns that stay continuous even when their values are all 0/1.
  std::vector<std::string> force_continuous;
  // Columns dropped on load.
  std::vector<std::string> ignore;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;  // rows with empty/NA/NaN/Inf cells
};

// Missing label/group column -> Config; non-numeric cell -> Parse naming the
// row and column; no data rows -> Data.
Dataset load_csv(const std::string& path, const LoadOptions& options, LoadReport* report = nullptr);
Dataset load_csv(const std::string& path, const std::string& label_name, const std::string& group_name);
Dataset parse_dataset(std::string_view csv_text, const LoadOptions& options, LoadReport* report = nullptr);

// Columns in order, then label, then group. Doubles use the shortest
// representation that round-trips exactly.
std::string to_csv(const Dataset& d);
void write_csv(const Dataset& d, const std::string& path);

struct ColumnScaling {
  std::string name;
  double mean = 0.0;
  double sd = 1.0;
};

struct ScalingParams {
  std::vector<ColumnScaling> columns;  // continuous columns only

  const ColumnScaling* find(std::string_view name) const;
  double to_standard(std::string_view name, double x) const;
  double from_standard(std::string_view name, double z) const;
};

nlohmann::json to_json(const ScalingParams& p);
ScalingParams scaling_from_json(const nlohmann::json& j);

// z-scores with the n-1 sample sd; binary columns pass through unchanged.
std::pair<Dataset, ScalingParams> standardize(const Dataset& d);
// Applies previously fitted params; columns without params pass through.
Dataset apply_scaling(const Dataset& d, const ScalingParams& params);

// Partitions whole groups; deterministic for a given seed.
std::pair<Dataset, Dataset> split_by_group(const Dataset& d, double test_fraction, std::uint64_t seed);

double mean(std::span<const double> x);
double sample_sd(std::span<const double> x);
// Product-moment correlation; 0 when either side has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct CandidateSet {
  std::vector<std::string> features;
  std::vector<double> correlations;

  std::size_t size() const { return features.size(); }
};

// Top-m features by |r| against target, descending; ties keep column order.
CandidateSet pearson_rank(const Dataset& d, std::span<const double> target, std::size_t m);

}  // namespace gamaudit
