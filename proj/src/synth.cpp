#include "gamaudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "gamaudit/error.hpp"
#include "gamaudit/rng.hpp"

namespace gamaudit {

using nlohmann::json;

void ThresholdTable::validate() const {
  if (scores.size() != cuts.size() + 1)
    throw Error(ErrorKind::Rule, fmt::format("threshold table has {} cuts but {} scores", cuts.size(), scores.size()));
  for (std::size_t i = 1; i < cuts.size(); ++i)
    if (!(cuts[i] > cuts[i - 1])) throw Error(ErrorKind::Rule, "threshold cuts must be strictly ascending");
  for (const double c : cuts)
    if (!std::isfinite(c)) throw Error(ErrorKind::Rule, "threshold cuts must be finite");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < 0 || scores[i] > 4) throw Error(ErrorKind::Rule, fmt::format("score {} outside [0, 4]", scores[i]));
    if (i == 0) continue;
    const bool ok = direction == Direction::Ascending ? scores[i] >= scores[i - 1] : scores[i] <= scores[i - 1];
    if (!ok) throw Error(ErrorKind::Rule, "threshold scores are not monotone in the declared direction");
  }
}

int eval_step(double x, const ThresholdTable& t) {
  // Number of cuts <= x: boundaries belong to the upper interval.
  const auto idx = std::upper_bound(t.cuts.begin(), t.cuts.end(), x) - t.cuts.begin();
  return t.scores[static_cast<std::size_t>(idx)];
}

RulePtr step(std::string feature, ThresholdTable table) {
  table.validate();
  return std::make_shared<const Rule>(Rule{StepRule{std::move(feature), std::move(table)}});
}

RulePtr max_of(std::vector<RulePtr> children) {
  if (children.empty()) throw Error(ErrorKind::Rule, "max needs at least one operand");
  return std::make_shared<const Rule>(Rule{MaxRule{std::move(children)}});
}

RulePtr product_of(std::vector<RulePtr> children) {
  if (children.empty()) throw Error(ErrorKind::Rule, "product needs at least one operand");
  return std::make_shared<const Rule>(Rule{ProductRule{std::move(children)}});
}

RulePtr greater_eq(RulePtr operand, double bound) {
  if (!operand) throw Error(ErrorKind::Rule, "greater_eq needs an operand");
  return std::make_shared<const Rule>(Rule{GreaterEqRule{std::move(operand), bound}});
}

RulePtr feature_value(std::string feature) {
  return std::make_shared<const Rule>(Rule{FeatureRule{std::move(feature)}});
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double eval_rule(const Rule& rule, const FeatureLookup& lookup) {
  return std::visit(
      overloaded{
          [&](const StepRule& r) { return static_cast<double>(eval_step(lookup(r.feature), r.table)); },
          [&](const MaxRule& r) {
            double v = -std::numeric_limits<double>::infinity();
            for (const auto& c : r.children) v = std::max(v, eval_rule(*c, lookup));
            return v;
          },
          [&](const ProductRule& r) {
            double v = 1.0;
            for (const auto& c : r.children) {
              const double x = eval_rule(*c, lookup);
              if (x != 0.0 && x != 1.0)
                throw Error(ErrorKind::Rule, fmt::format("product operand evaluated to {}, expected 0 or 1", x));
              v *= x;
            }
            return v;
          },
          [&](const GreaterEqRule& r) { return eval_rule(*r.operand, lookup) >= r.bound ? 1.0 : 0.0; },
          [&](const FeatureRule& r) { return lookup(r.feature); },
      },
      rule.node);
}

std::vector<std::string> referenced_features(const Rule& rule) {
  std::vector<std::string> out;
  const auto add = [&](const std::string& f) {
    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
  };
  const std::function<void(const Rule&)> walk = [&](const Rule& r) {
    std::visit(overloaded{
                   [&](const StepRule& s) { add(s.feature); },
                   [&](const MaxRule& s) {
                     for (const auto& c : s.children) walk(*c);
                   },
                   [&](const ProductRule& s) {
                     for (const auto& c : s.children) walk(*c);
                   },
                   [&](const GreaterEqRule& s) { walk(*s.operand); },
                   [&](const FeatureRule& s) { add(s.feature); },
               },
               r.node);
  };
  walk(rule);
  return out;
}

std::vector<double> label_rows(const Rule& rule, const Dataset& d) {
  std::vector<const Column*> cols;
  const auto names = referenced_features(rule);
  for (const auto& f : names) {
    const auto* c = d.find(f);
    if (c == nullptr) throw Error(ErrorKind::Rule, fmt::format("rule references unknown feature '{}'", f));
    cols.push_back(c);
  }
  std::vector<double> out(d.n_rows());
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    out[i] = eval_rule(rule, [&](std::string_view name) {
      for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return cols[k]->values[i];
      throw Error(ErrorKind::Rule, fmt::format("rule references unknown feature '{}'", name));
    });
  }
  return out;
}

namespace {

const char* direction_name(Direction d) { return d == Direction::Ascending ? "ascending" : "descending"; }

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where,
                ErrorKind kind) {
  if (!j.is_object()) throw Error(kind, fmt::format("{} must be a JSON object", where));
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(kind, fmt::format("unknown key '{}' in {}", key, where));
  }
}

}  // namespace

json to_json(const Rule& rule) {
  return std::visit(overloaded{
                        [](const StepRule& r) -> json {
                          return {{"step",
                                   {{"feature", r.feature},
                                    {"cuts", r.table.cuts},
                                    {"scores", r.table.scores},
                                    {"direction", direction_name(r.table.direction)}}}};
                        },
                        [](const MaxRule& r) -> json {
                          json c = json::array();
                          for (const auto& x : r.children) c.push_back(to_json(*x));
                          return {{"max", c}};
                        },
                        [](const ProductRule& r) -> json {
                          json c = json::array();
                          for (const auto& x : r.children) c.push_back(to_json(*x));
                          return {{"product", c}};
                        },
                        [](const GreaterEqRule& r) -> json {
                          return {{"greater_eq", {{"operand", to_json(*r.operand)}, {"bound", r.bound}}}};
                        },
                        [](const FeatureRule& r) -> json { return {{"feature", r.feature}}; },
                    },
                    rule.node);
}

RulePtr rule_from_json(const json& j) {
  try {
    if (!j.is_object() || j.size() != 1) throw Error(ErrorKind::Rule, "a rule is an object with exactly one key");
    const auto& [kind, body] = *j.items().begin();
    if (kind == "step") {
      check_keys(body, {"feature", "cuts", "scores", "direction"}, "step rule", ErrorKind::Rule);
      ThresholdTable t;
      t.cuts = body.at("cuts").get<std::vector<double>>();
      t.scores = body.at("scores").get<std::vector<int>>();
      const std::string dir = body.value("direction", "ascending");
      if (dir != "ascending" && dir != "descending")
        throw Error(ErrorKind::Rule, fmt::format("unknown direction '{}'", dir));
      t.direction = dir == "ascending" ? Direction::Ascending : Direction::Descending;
      return step(body.at("feature").get<std::string>(), std::move(t));
    }
    if (kind == "max" || kind == "product") {
      if (!body.is_array()) throw Error(ErrorKind::Rule, fmt::format("'{}' takes an array of rules", kind));
      std::vector<RulePtr> children;
      for (const auto& c : body) children.push_back(rule_from_json(c));
      return kind == "max" ? max_of(std::move(children)) : product_of(std::move(children));
    }
    if (kind == "greater_eq") {
      check_keys(body, {"operand", "bound"}, "greater_eq rule", ErrorKind::Rule);
      return greater_eq(rule_from_json(body.at("operand")), body.at("bound").get<double>());
    }
    if (kind == "feature") return feature_value(body.get<std::string>());
    throw Error(ErrorKind::Rule, fmt::format("unknown rule kind '{}'", kind));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Rule, fmt::format("malformed rule: {}", e.what()));
  }
}

namespace {

const char* transform_name(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Lognormal: return "lognormal";
    case Transform::Integer: return "integer";
    case Transform::Indicator: return "indicator";
    case Transform::Banded: return "banded";
  }
  return "?";
}

Transform transform_from(const std::string& s) {
  for (const auto t : {Transform::Identity, Transform::Lognormal, Transform::Integer, Transform::Indicator,
                       Transform::Banded})
    if (s == transform_name(t)) return t;
  throw Error(ErrorKind::Generation, fmt::format("unknown transform '{}'", s));
}

}  // namespace

void GenConfig::validate() const {
  if (n_patients == 0) throw Error(ErrorKind::Generation, "n_patients must be positive");
  if (rows_min == 0 || rows_max < rows_min) throw Error(ErrorKind::Generation, "rows per patient: need 1 <= min <= max");
  if (!(patient_share >= 0.0 && patient_share <= 1.0)) throw Error(ErrorKind::Generation, "patient_share outside [0, 1]");
  if (!(infection_rate >= 0.0 && infection_rate <= 1.0)) throw Error(ErrorKind::Generation, "infection_rate outside [0, 1]");
  if (features.empty()) throw Error(ErrorKind::Generation, "no features configured");
  if (!rule) throw Error(ErrorKind::Generation, "no labeling rule configured");
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty()) throw Error(ErrorKind::Generation, "feature with empty name");
    if (f.name == label_name || f.name == group_name)
      throw Error(ErrorKind::Generation, fmt::format("feature '{}' clashes with the label or group column", f.name));
    if (!names.insert(f.name).second) throw Error(ErrorKind::Generation, fmt::format("feature '{}' defined twice", f.name));
    if (!std::isfinite(f.intercept) || !std::isfinite(f.severity_loading) || !std::isfinite(f.infection_loading))
      throw Error(ErrorKind::Generation, fmt::format("feature '{}': loadings must be finite", f.name));
    if (f.transform != Transform::Indicator && !(f.noise_sd > 0.0 && std::isfinite(f.noise_sd)))
      throw Error(ErrorKind::Generation, fmt::format("feature '{}': noise_sd must be positive", f.name));
    if (f.transform == Transform::Integer && !(f.min <= f.max))
      throw Error(ErrorKind::Generation, fmt::format("feature '{}': min exceeds max", f.name));
    if (f.transform == Transform::Banded) {
      if (f.bands.size() != f.band_cuts.size() + 1)
        throw Error(ErrorKind::Generation, fmt::format("feature '{}': need one more band than band cuts", f.name));
      for (std::size_t i = 1; i < f.band_cuts.size(); ++i)
        if (!(f.band_cuts[i] > f.band_cuts[i - 1]))
          throw Error(ErrorKind::Generation, fmt::format("feature '{}': band cuts must ascend", f.name));
      for (const auto& b : f.bands)
        if (!(b.spread > 0.0) || !(b.lower < b.upper) || b.center < b.lower || b.center > b.upper)
          throw Error(ErrorKind::Generation,
                      fmt::format("feature '{}': each band needs spread > 0 and lower <= center <= upper", f.name));
    }
  }
  for (const auto& f : referenced_features(*rule))
    if (!names.count(f)) throw Error(ErrorKind::Rule, fmt::format("rule references unknown feature '{}'", f));
}

json to_json(const GenConfig& c) {
  json features = json::array();
  for (const auto& f : c.features) {
    json jf = {{"name", f.name}, {"transform", transform_name(f.transform)}};
    if (f.transform != Transform::Indicator) {
      jf["intercept"] = f.intercept;
      jf["severity_loading"] = f.severity_loading;
      jf["infection_loading"] = f.infection_loading;
      jf["noise_sd"] = f.noise_sd;
    }
    if (std::isfinite(f.min)) jf["min"] = f.min;
    if (std::isfinite(f.max)) jf["max"] = f.max;
    if (f.transform == Transform::Banded) {
      jf["band_cuts"] = f.band_cuts;
      json bands = json::array();
      for (const auto& b : f.bands)
        bands.push_back({{"center", b.center}, {"spread", b.spread}, {"lower", b.lower}, {"upper", b.upper}});
      jf["bands"] = bands;
    }
    features.push_back(std::move(jf));
  }
  return {{"name", c.name},
          {"seed", c.seed},
          {"n_patients", c.n_patients},
          {"rows_per_patient", {{"min", c.rows_min}, {"max", c.rows_max}}},
          {"patient_share", c.patient_share},
          {"infection_rate", c.infection_rate},
          {"label", c.label_name},
          {"group", c.group_name},
          {"features", features},
          {"rule", to_json(*c.rule)}};
}

GenConfig gen_config_from_json(const json& j) {
  try {
    check_keys(j, {"name", "seed", "n_patients", "rows_per_patient", "patient_share", "infection_rate", "label", "group",
                   "features", "rule"},
               "generator config", ErrorKind::Config);
    GenConfig c;
    c.name = j.value("name", "");
    c.seed = j.value("seed", c.seed);
    c.n_patients = j.value("n_patients", c.n_patients);
    if (j.contains("rows_per_patient")) {
      const auto& r = j.at("rows_per_patient");
      check_keys(r, {"min", "max"}, "rows_per_patient", ErrorKind::Config);
      c.rows_min = r.at("min").get<std::size_t>();
      c.rows_max = r.at("max").get<std::size_t>();
    }
    c.patient_share = j.value("patient_share", c.patient_share);
    c.infection_rate = j.value("infection_rate", c.infection_rate);
    c.label_name = j.value("label", c.label_name);
    c.group_name = j.value("group", c.group_name);
    for (const auto& jf : j.at("features")) {
      check_keys(jf,
                 {"name", "transform", "intercept", "severity_loading", "infection_loading", "noise_sd", "min", "max",
                  "band_cuts", "bands"},
                 "feature spec", ErrorKind::Config);
      FeatureSpec f;
      f.name = jf.at("name").get<std::string>();
      f.transform = transform_from(jf.value("transform", "identity"));
      f.intercept = jf.value("intercept", 0.0);
      f.severity_loading = jf.value("severity_loading", 0.0);
      f.infection_loading = jf.value("infection_loading", 0.0);
      f.noise_sd = jf.value("noise_sd", 1.0);
      f.min = jf.value("min", f.min);
      f.max = jf.value("max", f.max);
      f.band_cuts = jf.value("band_cuts", std::vector<double>{});
      if (jf.contains("bands")) {
        for (const auto& jb : jf.at("bands")) {
          check_keys(jb, {"center", "spread", "lower", "upper"}, "band", ErrorKind::Config);
          f.bands.push_back(Band{jb.at("center").get<double>(), jb.at("spread").get<double>(),
                                 jb.at("lower").get<double>(), jb.at("upper").get<double>()});
        }
      }
      c.features.push_back(std::move(f));
    }
    c.rule = rule_from_json(j.at("rule"));
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, fmt::format("malformed generator config: {}", e.what()));
  }
}

GenConfig load_gen_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open generator config '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
  return gen_config_from_json(j);
}

namespace {

double sample_band(const Band& b, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double v = b.center + b.spread * rng.normal();
    if (v >= b.lower && v <= b.upper) return v;
  }
  return std::clamp(b.center, b.lower, b.upper);
}

}  // namespace

Dataset generate(const GenConfig& c) {
  c.validate();
  Rng rng(c.seed);

  Dataset d;
  d.label_name = c.label_name;
  d.group_name = c.group_name;
  for (const auto& f : c.features)
    d.columns.push_back(Column{f.name, {}, f.transform == Transform::Indicator ? ColumnKind::Binary : ColumnKind::Continuous});

  const double row_share = std::sqrt(1.0 - c.patient_share * c.patient_share);
  for (std::size_t p = 0; p < c.n_patients; ++p) {
    const double patient_severity = rng.normal();
    const auto rows = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(c.rows_min), static_cast<std::int64_t>(c.rows_max)));
    const bool infected = rng.bernoulli(c.infection_rate);
    const std::size_t onset = infected ? static_cast<std::size_t>(rng.below(rows)) : rows;

    for (std::size_t r = 0; r < rows; ++r) {
      const double severity = c.patient_share * patient_severity + row_share * rng.normal();
      const double inf = r >= onset ? 1.0 : 0.0;
      for (std::size_t k = 0; k < c.features.size(); ++k) {
        const auto& f = c.features[k];
        if (f.transform == Transform::Indicator) {
          d.columns[k].values.push_back(inf);
          continue;
        }
        const double noise = rng.normal();
        const double eta = f.intercept + f.severity_loading * severity + f.infection_loading * inf + f.noise_sd * noise;
        double v = eta;
        switch (f.transform) {
          case Transform::Lognormal:
            v = std::exp(eta);
            break;
          case Transform::Integer:
            v = std::clamp(std::round(eta), f.min, f.max);
            break;
          case Transform::Banded: {
            const double scale = std::hypot(f.severity_loading, f.noise_sd);
            const double z = (eta - f.intercept) / scale;
            const auto band = std::upper_bound(f.band_cuts.begin(), f.band_cuts.end(), z) - f.band_cuts.begin();
            v = sample_band(f.bands[static_cast<std::size_t>(band)], rng);
            break;
          }
          default:
            break;
        }
        d.columns[k].values.push_back(v);
      }
      d.group_id.push_back(static_cast<std::int64_t>(p + 1));
    }
  }
  d.label.assign(d.group_id.size(), 0.0);
  d.label = label_rows(*c.rule, d);
  d.validate();
  return d;
}

namespace {

FeatureSpec lognormal(std::string name, double intercept, double severity, double infection, double noise) {
  FeatureSpec f;
  f.name = std::move(name);
  f.transform = Transform::Lognormal;
  f.intercept = intercept;
  f.severity_loading = severity;
  f.infection_loading = infection;
  f.noise_sd = noise;
  return f;
}

FeatureSpec normal(std::string name, double intercept, double severity, double infection, double noise) {
  auto f = lognormal(std::move(name), intercept, severity, infection, noise);
  f.transform = Transform::Identity;
  return f;
}

FeatureSpec banded(std::string name, double severity, double noise, std::vector<double> cuts, std::vector<Band> bands) {
  FeatureSpec f;
  f.name = std::move(name);
  f.transform = Transform::Banded;
  f.severity_loading = severity;
  f.noise_sd = noise;
  f.band_cuts = std::move(cuts);
  f.bands = std::move(bands);
  return f;
}

GenConfig liver() {
  GenConfig c;
  c.name = "liver";
  c.label_name = "sofa_liver";
  // Score shares 0.76 / 0.17 / 0.05 / 0.015 / 0.005 via normal quantiles.
  c.features = {
      banded("bilirubin", 1.0, 0.35, {0.7063, 1.4758, 2.0537, 2.5758},
             {{0.6, 0.3, 0.1, 1.15}, {1.55, 0.12, 1.3, 1.85}, {3.0, 0.6, 2.3, 5.2}, {8.0, 1.2, 6.6, 10.8},
              {15.0, 3.0, 13.0, 30.0}}),
      lognormal("asat", 3.3, 0.38, 0.0, 0.5),
      lognormal("quick_inr", 0.1, 0.1, 0.0, 0.15),
      lognormal("alat", 3.2, 0.33, 0.0, 0.55),
      lognormal("thrombocytes", 5.3, -0.3, 0.0, 0.45),
      normal("cardiac_output", 6.0, 0.5, 0.0, 1.5),
      normal("svri", 1800.0, -150.0, 0.0, 400.0),
      lognormal("urine_24h", 7.4, -0.25, 0.0, 0.5),
  };
  c.rule = step("bilirubin", {{1.2, 2.0, 6.0, 12.0}, {0, 1, 2, 3, 4}, Direction::Ascending});
  return c;
}

GenConfig kidney() {
  GenConfig c;
  c.name = "kidney";
  c.label_name = "sofa_kidney";
  c.features = {
      banded("creatinine", 1.0, 0.35, {0.1257, 0.6745, 1.1264, 1.6449},
             {{0.85, 0.2, 0.4, 1.15}, {1.55, 0.15, 1.3, 1.85}, {2.7, 0.35, 2.15, 3.3}, {4.2, 0.3, 3.7, 4.8},
              {6.5, 1.0, 5.3, 10.0}}),
      lognormal("urine_24h", 7.3, -0.26, 0.0, 0.5),
      lognormal("thrombocytes", 5.3, -0.35, 0.0, 0.45),
      lognormal("leukocytes", 2.2, 0.3, 0.0, 0.35),
      lognormal("crp", 3.5, 0.5, 0.0, 0.9),
      normal("sodium", 140.0, 1.5, 0.0, 4.0),
  };
  c.rule = max_of({step("creatinine", {{1.2, 2.0, 3.5, 5.0}, {0, 1, 2, 3, 4}, Direction::Ascending}),
                   step("urine_24h", {{200.0, 500.0}, {4, 3, 0}, Direction::Descending})});
  return c;
}

GenConfig sepsis() {
  GenConfig c;
  c.name = "sepsis";
  c.label_name = "sepsis3";
  FeatureSpec infection;
  infection.name = "suspected_infection";
  infection.transform = Transform::Indicator;
  FeatureSpec sofa = normal("sofa_24h", 3.83, 0.2, 0.3, 1.27);
  sofa.transform = Transform::Integer;
  sofa.min = 0;
  sofa.max = 24;
  c.features = {
      infection,
      sofa,
      lognormal("leukocytes", 2.2, 0.15, 0.3, 0.35),
      normal("cardiac_output", 6.0, 0.4, 0.5, 1.5),
      normal("sodium", 140.0, 1.0, 1.0, 4.0),
      lognormal("crp", 3.5, 0.3, 0.8, 0.9),
  };
  c.rule = product_of({greater_eq(feature_value("suspected_infection"), 1.0), greater_eq(feature_value("sofa_24h"), 2.0)});
  return c;
}

}  // namespace

GenConfig default_config(std::string_view name) {
  if (name == "liver") return liver();
  if (name == "kidney") return kidney();
  if (name == "sepsis") return sepsis();
  throw Error(ErrorKind::Config, fmt::format("no built-in generator config named '{}'", name));
}

}  // namespace gamaudit
