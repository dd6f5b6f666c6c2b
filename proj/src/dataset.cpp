#include "gamaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "gamaudit/csv.hpp"
#include "gamaudit/error.hpp"
#include "gamaudit/log.hpp"
#include "gamaudit/rng.hpp"

namespace gamaudit {

const char* to_string(ColumnKind kind) { return kind == ColumnKind::Binary ? "binary" : "continuous"; }

const Column* Dataset::find(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

Column* Dataset::find(std::string_view name) {
  for (auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

const Column& Dataset::column(std::string_view name) const {
  if (const auto* c = find(name)) return *c;
  throw Error(ErrorKind::Prediction, fmt::format("dataset has no feature column '{}'", name));
}

std::vector<std::string> Dataset::feature_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.label_name = label_name;
  out.group_name = group_name;
  out.columns.reserve(columns.size());
  for (const auto& c : columns) {
    Column nc{c.name, {}, c.kind};
    nc.values.reserve(rows.size());
    for (auto r : rows) nc.values.push_back(c.values[r]);
    out.columns.push_back(std::move(nc));
  }
  out.label.reserve(rows.size());
  out.group_id.reserve(rows.size());
  for (auto r : rows) {
    out.label.push_back(label[r]);
    out.group_id.push_back(group_id[r]);
  }
  return out;
}

void Dataset::validate() const {
  const auto n = n_rows();
  if (n == 0) throw Error(ErrorKind::Data, "dataset has no rows");
  if (group_id.size() != n) throw Error(ErrorKind::Data, "group id length differs from label length");
  std::set<std::string_view> seen;
  for (const auto& c : columns) {
    if (!seen.insert(c.name).second) throw Error(ErrorKind::Data, fmt::format("duplicate column '{}'", c.name));
    if (c.values.size() != n)
      throw Error(ErrorKind::Data, fmt::format("column '{}' has {} values, expected {}", c.name, c.values.size(), n));
    for (const double v : c.values) {
      if (!std::isfinite(v)) throw Error(ErrorKind::Data, fmt::format("column '{}' has a non-finite value", c.name));
      if (c.kind == ColumnKind::Binary && v != 0.0 && v != 1.0)
        throw Error(ErrorKind::Data, fmt::format("binary column '{}' holds value {}", c.name, v));
    }
  }
  for (const double v : label)
    if (!std::isfinite(v)) throw Error(ErrorKind::Data, "label has a non-finite value");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NULL";
}

// nullopt: missing cell. Throws on garbage.
std::optional<double> parse_cell(std::string_view raw, std::size_t row, std::string_view column) {
  auto s = trim(raw);
  if (is_missing_token(s)) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::Parse, fmt::format("non-numeric cell '{}' at row {}, column '{}'", raw, row, column));
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Dataset parse_dataset(std::string_view csv_text, const LoadOptions& options, LoadReport* report) {
  const auto table = csv::parse(csv_text);
  if (table.header.empty()) throw Error(ErrorKind::Data, "empty csv: no header row");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const std::string name(trim(table.header[i]));
    if (!index.emplace(name, i).second) throw Error(ErrorKind::Config, fmt::format("duplicate header '{}'", name));
  }
  auto require = [&](const std::string& name, const char* role) -> std::size_t {
    const auto it = index.find(name);
    if (it == index.end()) throw Error(ErrorKind::Config, fmt::format("{} column '{}' not found in header", role, name));
    return it->second;
  };

  // Without a group column every row is its own group.
  std::optional<std::size_t> group_col;
  if (!options.group_name.empty()) group_col = require(options.group_name, "group");
  std::optional<std::size_t> label_col;
  if (options.require_label) {
    label_col = require(options.label_name, "label");
  } else if (auto it = index.find(options.label_name); !options.label_name.empty() && it != index.end()) {
    label_col = it->second;
  }
  const std::set<std::string> ignored(options.ignore.begin(), options.ignore.end());

  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if ((group_col && i == *group_col) || (label_col && i == *label_col)) continue;
    if (ignored.count(std::string(trim(table.header[i])))) continue;
    feature_cols.push_back(i);
  }

  if (table.rows.empty()) throw Error(ErrorKind::Data, "csv has a header but no data rows");

  Dataset d;
  d.label_name = options.label_name;
  d.group_name = options.group_name;
  for (auto i : feature_cols) d.columns.push_back(Column{std::string(trim(table.header[i])), {}, ColumnKind::Continuous});

  std::size_t dropped = 0;
  std::vector<double> row_values(feature_cols.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    if (row.size() != table.header.size())
      throw Error(ErrorKind::Parse,
                  fmt::format("row {} has {} fields, header has {}", row_no, row.size(), table.header.size()));
    bool complete = true;
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      const auto v = parse_cell(row[feature_cols[j]], row_no, table.header[feature_cols[j]]);
      if (!v) complete = false;
      row_values[j] = v.value_or(0.0);
    }
    double label = 0.0;
    if (label_col) {
      const auto v = parse_cell(row[*label_col], row_no, options.label_name);
      if (!v) complete = false;
      label = v.value_or(0.0);
    }
    const auto g = group_col ? parse_cell(row[*group_col], row_no, options.group_name)
                             : std::optional<double>(static_cast<double>(row_no));
    if (!g) complete = false;
    if (g && *g != std::floor(*g))
      throw Error(ErrorKind::Parse, fmt::format("group id '{}' at row {} is not an integer", row[*group_col], row_no));
    if (!complete) {
      ++dropped;
      continue;
    }
    for (std::size_t j = 0; j < feature_cols.size(); ++j) d.columns[j].values.push_back(row_values[j]);
    d.label.push_back(label);
    d.group_id.push_back(static_cast<std::int64_t>(*g));
  }

  if (dropped > 0) log::warn("dropped {} of {} rows with missing or non-finite values", dropped, table.rows.size());
  if (report) *report = LoadReport{table.rows.size(), dropped};
  if (d.n_rows() == 0) throw Error(ErrorKind::Data, "no complete rows left after dropping missing values");

  const std::set<std::string> keep_continuous(options.force_continuous.begin(), options.force_continuous.end());
  for (auto& c : d.columns) {
    const bool binary =
        std::all_of(c.values.begin(), c.values.end(), [](double v) { return v == 0.0 || v == 1.0; });
    c.kind = (binary && !keep_continuous.count(c.name)) ? ColumnKind::Binary : ColumnKind::Continuous;
  }
  return d;
}

Dataset load_csv(const std::string& path, const LoadOptions& options, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open data file '{}'", path));
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_dataset(text, options, report);
}

Dataset load_csv(const std::string& path, const std::string& label_name, const std::string& group_name) {
  LoadOptions options;
  options.label_name = label_name;
  options.group_name = group_name;
  return load_csv(path, options);
}

std::string to_csv(const Dataset& d) {
  std::string out;
  for (const auto& c : d.columns) {
    out += csv::escape(c.name);
    out += ',';
  }
  out += csv::escape(d.label_name);
  out += ',';
  out += csv::escape(d.group_name.empty() ? std::string("pid") : d.group_name);
  out += '\n';
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    for (const auto& c : d.columns) {
      out += fmt::format("{}", c.values[r]);
      out += ',';
    }
    out += fmt::format("{},{}\n", d.label[r], d.group_id[r]);
  }
  return out;
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, fmt::format("cannot write '{}'", path));
  out << to_csv(d);
}

const ColumnScaling* ScalingParams::find(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

double ScalingParams::to_standard(std::string_view name, double x) const {
  const auto* c = find(name);
  return c ? (x - c->mean) / c->sd : x;
}

double ScalingParams::from_standard(std::string_view name, double z) const {
  const auto* c = find(name);
  return c ? c->mean + c->sd * z : z;
}

nlohmann::json to_json(const ScalingParams& p) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : p.columns) j.push_back({{"name", c.name}, {"mean", c.mean}, {"sd", c.sd}});
  return j;
}

ScalingParams scaling_from_json(const nlohmann::json& j) {
  ScalingParams p;
  for (const auto& e : j) p.columns.push_back(ColumnScaling{e.at("name"), e.at("mean"), e.at("sd")});
  return p;
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (const double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

std::pair<Dataset, ScalingParams> standardize(const Dataset& d) {
  ScalingParams params;
  for (const auto& c : d.columns) {
    if (c.kind == ColumnKind::Binary) continue;
    const double sd = sample_sd(c.values);
    if (!(sd > 0.0))
      throw Error(ErrorKind::Degenerate, fmt::format("column '{}' is constant and cannot be standardized", c.name));
    params.columns.push_back(ColumnScaling{c.name, mean(c.values), sd});
  }
  return {apply_scaling(d, params), params};
}

Dataset apply_scaling(const Dataset& d, const ScalingParams& params) {
  Dataset out = d;
  for (auto& c : out.columns) {
    const auto* s = params.find(c.name);
    if (s == nullptr) continue;
    for (auto& v : c.values) v = (v - s->mean) / s->sd;
  }
  return out;
}

std::pair<Dataset, Dataset> split_by_group(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorKind::Config, fmt::format("test fraction {} outside (0, 1)", test_fraction));

  std::map<std::int64_t, std::size_t> group_rows;
  for (const auto g : d.group_id) ++group_rows[g];
  if (group_rows.size() < 2)
    throw Error(ErrorKind::Split, fmt::format("need at least 2 distinct groups to split, found {}", group_rows.size()));

  std::vector<std::int64_t> groups;
  groups.reserve(group_rows.size());
  for (const auto& [g, _] : group_rows) groups.push_back(g);
  Rng rng(seed);
  rng.shuffle(groups.begin(), groups.end());

  // Take shuffled groups into the test side while that brings the test share
  // closer to the target.
  const double n = static_cast<double>(d.n_rows());
  std::set<std::int64_t> test_groups;
  std::size_t test_rows = 0;
  for (const auto g : groups) {
    if (test_groups.size() + 1 == groups.size()) break;
    const double before = std::abs(test_rows / n - test_fraction);
    const double after = std::abs((test_rows + group_rows[g]) / n - test_fraction);
    if (test_groups.empty() || after < before) {
      test_groups.insert(g);
      test_rows += group_rows[g];
    }
  }

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t r = 0; r < d.n_rows(); ++r)
    (test_groups.count(d.group_id[r]) ? test_idx : train_idx).push_back(r);
  return {d.select_rows(train_idx), d.select_rows(test_idx)};
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  const double mx = mean(x.first(n));
  const double my = mean(y.first(n));
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CandidateSet pearson_rank(const Dataset& d, std::span<const double> target, std::size_t m) {
  if (target.size() != d.n_rows())
    throw Error(ErrorKind::Data, fmt::format("target has {} values for {} rows", target.size(), d.n_rows()));
  if (m == 0) throw Error(ErrorKind::Config, "candidate count must be at least 1");
  if (m > kMaxCandidates)
    throw Error(ErrorKind::Config, fmt::format("candidate count {} exceeds the limit of {}", m, kMaxCandidates));

  if (sample_sd(target) == 0.0) log::warn("target has zero variance; all correlations are 0");
  std::vector<std::pair<std::string, double>> scored;
  for (const auto& c : d.columns) {
    if (sample_sd(c.values) == 0.0) log::warn("feature '{}' has zero variance; correlation set to 0", c.name);
    scored.emplace_back(c.name, pearson(c.values, target));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
  CandidateSet out;
  for (std::size_t i = 0; i < std::min(m, scored.size()); ++i) {
    out.features.push_back(scored[i].first);
    out.correlations.push_back(scored[i].second);
  }
  return out;
}

}  // namespace gamaudit
