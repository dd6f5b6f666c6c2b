#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gamaudit/detect.hpp"
#include "gamaudit/error.hpp"
#include "gamaudit/rng.hpp"
#include "gamaudit/synth.hpp"
#include "support/fixtures.hpp"

using namespace gamaudit;

namespace {

RankedModel model(std::string name, double d2, double edf, bool failed = false) {
  RankedModel m;
  m.features = {name};
  m.name = std::move(name);
  m.d2 = d2;
  m.edf = edf;
  m.failed = failed;
  return m;
}

std::vector<std::string> names(const std::vector<RankedModel>& v) {
  std::vector<std::string> out;
  for (const auto& m : v) out.push_back(m.name);
  return out;
}

DetectionConfig single_worker() {
  DetectionConfig c;
  c.workers = 1;
  return c;
}

CandidateSet cands(std::vector<std::string> f) {
  CandidateSet c;
  c.features = std::move(f);
  return c;
}

// y = f(x0) + g(x1) with x2 irrelevant.
Dataset additive(std::size_t n, std::uint64_t seed, double noise = 0.05) {
  return fixture::smooth_data(n, 3, seed, noise);
}

Dataset small_liver(std::uint64_t seed = 1) {
  auto c = default_config("liver");
  c.seed = seed;
  c.n_patients = 150;
  return generate(c);
}

}  // namespace

TEST_CASE("ranking: D2 first, edf inside the tie window, then name") {
  const std::vector<RankedModel> in{model("a", 0.990, 9.0), model("b", 0.993, 4.0), model("c", 0.996, 6.0),
                                    model("d", 0.80, 1.0), model("e", 0.0, 0.0, true), model("f", 0.993, 4.0)};
  const auto out = rank_models(in, 0.005);
  // Within 0.005 of 0.996: b, c, f; b and f tie on edf, name decides.
  CHECK(names(out) == std::vector<std::string>{"b", "f", "c", "a", "d", "e"});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].rank == i + 1);

  const auto strict = rank_models(in, 0.0);
  CHECK(names(strict).front() == "c");
}

TEST_CASE("ranking is independent of input order") {
  Rng rng(3);
  std::vector<RankedModel> in;
  for (int i = 0; i < 40; ++i) {
    const double d2 = std::round(rng.uniform() * 50.0) / 50.0;
    const double edf = 1.0 + std::round(rng.uniform() * 5.0);
    in.push_back(model("m" + std::to_string(i), d2, edf, i % 13 == 0));
  }
  const auto ref = names(rank_models(in, 0.02));
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(in.begin(), in.end());
    CHECK(names(rank_models(in, 0.02)) == ref);
  }
}

TEST_CASE("subset names follow candidate order") {
  const std::vector<std::string> f{"creatinine", "urine_24h"};
  CHECK(subset_name(f) == "creatinine + urine_24h");
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    DetectionConfig c;
    mutate(c);
    try {
      c.validate();
    } catch (const Error& e) {
      return e.kind() == ErrorKind::Config;
    }
    return false;
  };
  CHECK(bad([](DetectionConfig& c) { c.d2_threshold = 0.0; }));
  CHECK(bad([](DetectionConfig& c) { c.d2_threshold = 1.1; }));
  CHECK(bad([](DetectionConfig& c) { c.d2_tie_window = 0.96; }));
  CHECK(bad([](DetectionConfig& c) { c.nullification_threshold = 1.0; }));
  CHECK(bad([](DetectionConfig& c) { c.max_candidates = 9; }));
  CHECK(bad([](DetectionConfig& c) { c.gam.basis_size = 3; }));
  CHECK_NOTHROW(DetectionConfig{}.validate());
}

TEST_CASE("too many candidates") {
  const auto d = standardize(additive(300, 1)).first;
  auto cfg = single_worker();
  cfg.max_candidates = 2;
  try {
    step1_search(d, d, cands({"x0", "x1", "x2"}), cfg);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("nullification score of a zero shape is zero") {
  const auto d = standardize(additive(300, 2)).first;
  auto g = optimize_lambdas(d, std::vector<std::string>{"x0", "x1"});
  CHECK(*nullification_score(g, "x0") > 0.05);
  g.terms[0].shape_sd = 0.0;
  g.terms[0].coef.setZero();
  CHECK(*nullification_score(g, "x0") == 0.0);
  g.fitted_sd = 0.0;
  CHECK_FALSE(nullification_score(g, "x1").has_value());
}

TEST_CASE("additive two-feature signal is found and confirmed") {
  const auto data = additive(3000, 4);
  const auto [train, eval] = split_by_group(data, 0.2, 1);
  const auto r = detect(train, eval, single_worker(), cands({"x0", "x1", "x2"}));
  REQUIRE(r.step1.defining);
  CHECK(*r.step1.defining == std::vector<std::string>{"x0", "x1"});
  CHECK(r.step1.ranked.size() == 7);
  REQUIRE(r.step2);
  CHECK(r.step2->confirmed);
  CHECK(r.step2->scores.size() == 3);
  CHECK(r.step2->scores[2].feature == "x2");
  CHECK_FALSE(r.step2->scores[2].defining);
  CHECK(*r.step2->scores[2].score < 0.05);
  REQUIRE(r.step2->defining_free);
  CHECK(r.step2->defining_free->features == std::vector<std::string>{"x2"});
}

TEST_CASE("a non-nullified remaining candidate refutes") {
  const auto d = standardize(additive(3000, 5)).first;
  const std::vector<std::string> defining{"x0"};
  const auto s2 = step2_nullify(d, d, defining, cands({"x0", "x1", "x2"}), single_worker());
  CHECK_FALSE(s2.confirmed);
  CHECK(*s2.scores[1].score >= 0.05);
}

TEST_CASE("noise labels give no defining set") {
  int none = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto data = fixture::noise_data(1500, 3, seed);
    const auto [train, eval] = split_by_group(data, 0.2, seed);
    const auto r = detect(train, eval, single_worker(), cands({"x0", "x1", "x2"}));
    if (!r.step1.defining) ++none;
    if (seed == 1) {
      const auto j = to_json(r);
      CHECK(j.at("step1").at("verdict") == "none");
      CHECK_FALSE(j.contains("step2"));
    }
  }
  CHECK(none >= 19);
}

TEST_CASE("raising delta never creates a defining set") {
  const auto data = additive(2000, 6, 0.4);
  const auto [train, eval] = split_by_group(data, 0.2, 1);
  bool found_before = true;
  for (double delta : {0.5, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0}) {
    auto cfg = single_worker();
    cfg.d2_threshold = delta;
    const bool found = detect(train, eval, cfg, cands({"x0", "x1", "x2"})).step1.defining.has_value();
    CHECK((found_before || !found));
    found_before = found;
  }
}

TEST_CASE("scaling the labels leaves the ranking unchanged") {
  const auto data = additive(1500, 7, 0.3);
  const auto [train, eval] = split_by_group(data, 0.2, 1);
  auto train2 = train, eval2 = eval;
  for (auto& y : train2.label) y *= 3.7;
  for (auto& y : eval2.label) y *= 3.7;
  const auto a = detect(train, eval, single_worker(), cands({"x0", "x1", "x2"}));
  const auto b = detect(train2, eval2, single_worker(), cands({"x0", "x1", "x2"}));
  CHECK(names(a.step1.ranked) == names(b.step1.ranked));
  CHECK(a.step1.defining == b.step1.defining);
}

TEST_CASE("reports do not depend on the worker count") {
  const auto data = additive(1500, 8, 0.3);
  const auto [train, eval] = split_by_group(data, 0.2, 1);
  auto cfg = single_worker();
  const auto a = to_json(detect(train, eval, cfg, cands({"x0", "x1", "x2"}))).dump();
  cfg.workers = 4;
  const auto b = to_json(detect(train, eval, cfg, cands({"x0", "x1", "x2"}))).dump();
  CHECK(a == b);
}

TEST_CASE("liver: nuisance features carry signal without bilirubin and are nullified with it") {
  const auto data = small_liver();
  const auto [train, eval] = split_by_group(data, 0.2, 1);
  const std::vector<std::string> nuisance{"asat", "quick_inr", "alat", "thrombocytes"};
  const auto r = detect(train, eval, single_worker(), cands({"bilirubin", "asat", "quick_inr", "alat", "thrombocytes"}));
  REQUIRE(r.step1.defining);
  CHECK(*r.step1.defining == std::vector<std::string>{"bilirubin"});
  REQUIRE(r.step2);
  CHECK(r.step2->confirmed);
  CHECK(r.step2->extended.d2 >= 0.99);
  REQUIRE(r.step2->defining_free);
  CHECK(r.step2->defining_free->d2 <= 0.6);
  for (const auto& f : nuisance) CHECK(*nullification_score(r.step2->defining_free->model, f) >= 0.05);
}

TEST_CASE("liver bilirubin shape has plateaus at the score levels") {
  const auto data = small_liver(2);
  const auto [train, eval] = split_by_group(data, 0.2, 1);
  const auto r = detect(train, eval, single_worker(), cands({"bilirubin", "asat"}));
  REQUIRE(r.step2);
  const auto& bili = r.step2->extended.model.term("bilirubin");
  const auto& sc = r.step2->extended.model.scaling;
  // Band centres of the generator, one per score.
  const std::vector<double> centres{0.6, 1.55, 3.0, 8.0, 15.0};
  std::vector<double> z;
  for (double c : centres) z.push_back(sc.to_standard("bilirubin", c));
  const auto f = bili.evaluate(z);
  for (Eigen::Index i = 1; i < f.size(); ++i) CHECK(f(i) - f(i - 1) == doctest::Approx(1.0).epsilon(0.2));

  // Half-way crossings between neighbouring plateaus fall near the thresholds.
  const std::vector<double> thresholds{1.2, 2.0, 6.0, 12.0};
  const auto s = shape(r.step2->extended.model, "bilirubin", 2000);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const double level = f(static_cast<Eigen::Index>(k)) + 0.5;
    std::size_t i = 0;
    while (i < s.grid.size() && (s.grid[i] < centres[k] || s.values[i] < level)) ++i;
    REQUIRE(i < s.grid.size());
    MESSAGE("threshold " << thresholds[k] << " crossing " << s.grid[i]);
    CHECK(std::abs(s.grid[i] - thresholds[k]) <= 0.25 * thresholds[k] + 0.3);
  }
}
