#include <fmt/format.h>

#include "gamaudit/detect.hpp"

namespace gamaudit {

using nlohmann::json;

json to_json(const DetectionConfig& c) {
  return {{"d2_threshold", c.d2_threshold},
          {"d2_tie_window", c.d2_tie_window},
          {"nullification_threshold", c.nullification_threshold},
          {"max_candidates", c.max_candidates},
          {"gam", to_json(c.gam)}};
}

namespace {

json to_json(const FeatureShape& s) {
  return {{"feature", s.feature}, {"shape_sd", s.shape_sd}, {"grid", s.grid}, {"values", s.values}};
}

json to_json(const ModelSummary& m) {
  json shapes = json::array();
  for (const auto& s : m.shapes) shapes.push_back(to_json(s));
  return {{"features", m.features}, {"d2", m.d2}, {"edf", m.edf}, {"shapes", std::move(shapes)}};
}

}  // namespace

json to_json(const DetectionReport& r) {
  json ranked = json::array();
  for (const auto& m : r.step1.ranked) {
    json e = {{"rank", m.rank}, {"features", m.features}, {"name", m.name}, {"failed", m.failed}};
    if (m.failed) {
      e["diagnostic"] = m.diagnostic;
    } else {
      e["d2"] = m.d2;
      e["d2_train"] = m.d2_train;
      e["edf"] = m.edf;
    }
    ranked.push_back(std::move(e));
  }

  json candidates = json::array();
  for (std::size_t i = 0; i < r.candidates.size(); ++i)
    candidates.push_back({{"feature", r.candidates.features[i]}, {"correlation", r.candidates.correlations[i]}});

  json j = {
      {"target", r.target},
      {"n_train", r.n_train},
      {"n_eval", r.n_eval},
      {"config", to_json(r.config)},
      {"choices",
       {{"family", "gaussian"},
        {"link", "identity"},
        {"basis", fmt::format("cubic B-spline, k = {}, knots at quantiles of distinct values", r.config.gam.basis_size)},
        {"penalty", "second-order divided differences of coefficients at Greville abscissae"},
        {"smoothing", "GCV, coordinate descent over a 13-point log grid, 2 sweeps"},
        {"d2_data", "held-out evaluation set, evaluation mean as null model"},
        {"edf_data", "training fit"},
        {"step2_lambdas", "re-optimized for the extended model"},
        {"nullification_score", "sd of feature shape over training rows / sd of fitted values"}}},
      {"scaling", to_json(r.scaling)},
      {"candidates", std::move(candidates)},
      {"step1",
       {{"verdict", r.step1.defining ? "defining-set-found" : "none"},
        {"defining", r.step1.defining ? json(*r.step1.defining) : json(nullptr)},
        {"ranked", std::move(ranked)}}},
  };
  if (r.step2) {
    json scores = json::array();
    for (const auto& s : r.step2->scores)
      scores.push_back({{"feature", s.feature},
                        {"defining", s.defining},
                        {"score", s.score ? json(*s.score) : json(nullptr)}});
    j["step2"] = {{"verdict", r.step2->confirmed ? "confirmed" : "refuted"},
                  {"scores", std::move(scores)},
                  {"extended", to_json(r.step2->extended)},
                  {"defining_free", r.step2->defining_free ? to_json(*r.step2->defining_free) : json(nullptr)}};
  }
  return j;
}

std::string to_text(const DetectionReport& r) {
  std::size_t width = 8;
  for (const auto& m : r.step1.ranked) width = std::max(width, m.name.size());

  std::string out = fmt::format("target: {}   train rows: {}   eval rows: {}\n", r.target, r.n_train, r.n_eval);
  out += fmt::format("delta = {}   epsilon = {}   tau = {}   basis size = {}\n\n", r.config.d2_threshold,
                     r.config.d2_tie_window, r.config.nullification_threshold, r.config.gam.basis_size);
  out += fmt::format("{:>4}  {:<{}}  {:>8}  {:>8}\n", "rank", "features", width, "D2", "edf");
  for (const auto& m : r.step1.ranked) {
    if (m.failed) {
      out += fmt::format("{:>4}  {:<{}}  {:>8}  {:>8}\n", m.rank, m.name, width, "failed", "-");
    } else {
      out += fmt::format("{:>4}  {:<{}}  {:>7.2f}%  {:>8.2f}\n", m.rank, m.name, width, 100.0 * m.d2, m.edf);
    }
  }
  out += "\nstep 1: ";
  out += r.step1.defining ? fmt::format("defining set {{{}}}\n", subset_name(*r.step1.defining)) : "no defining set\n";
  if (r.step2) {
    out += fmt::format("step 2: {}\n", r.step2->confirmed ? "confirmed" : "refuted");
    for (const auto& s : r.step2->scores) {
      out += fmt::format("  {:<{}}  {:>8}  {}\n", s.feature, width, s.score ? fmt::format("{:.4f}", *s.score) : "n/a",
                         s.defining ? "defining" : (s.score && *s.score < r.config.nullification_threshold ? "nullified" : "active"));
    }
    out += fmt::format("  extended model D2 = {:.2f}%\n", 100.0 * r.step2->extended.d2);
    if (r.step2->defining_free)
      out += fmt::format("  defining-free model D2 = {:.2f}%\n", 100.0 * r.step2->defining_free->d2);
  }
  return out;
}

}  // namespace gamaudit
