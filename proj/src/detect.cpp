#include "gamaudit/detect.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "gamaudit/error.hpp"
#include "gamaudit/log.hpp"

namespace gamaudit {

void DetectionConfig::validate() const {
  if (!(d2_threshold > 0.0 && d2_threshold <= 1.0))
    throw Error(ErrorKind::Config, fmt::format("D2 threshold {} outside (0, 1]", d2_threshold));
  if (!(d2_tie_window >= 0.0 && d2_tie_window < d2_threshold))
    throw Error(ErrorKind::Config, fmt::format("tie window {} must lie in [0, delta)", d2_tie_window));
  if (!(nullification_threshold > 0.0 && nullification_threshold < 1.0))
    throw Error(ErrorKind::Config, fmt::format("nullification threshold {} outside (0, 1)", nullification_threshold));
  if (max_candidates == 0 || max_candidates > kMaxCandidates)
    throw Error(ErrorKind::Config, fmt::format("max candidates must be in [1, {}], got {}", kMaxCandidates, max_candidates));
  if (gam.basis_size < kMinBasisSize || gam.basis_size > kMaxBasisSize)
    throw Error(ErrorKind::Config,
                fmt::format("basis size {} outside [{}, {}]", gam.basis_size, kMinBasisSize, kMaxBasisSize));
}

std::string subset_name(std::span<const std::string> features) {
  std::string out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i > 0) out += " + ";
    out += features[i];
  }
  return out;
}

std::vector<RankedModel> rank_models(std::vector<RankedModel> models, double epsilon) {
  std::vector<RankedModel> ok;
  std::vector<RankedModel> failed;
  for (auto& m : models) (m.failed ? failed : ok).push_back(std::move(m));

  const auto by_name = [](const RankedModel& a, const RankedModel& b) { return a.name < b.name; };
  std::sort(ok.begin(), ok.end(), by_name);
  std::sort(failed.begin(), failed.end(), by_name);

  std::vector<RankedModel> out;
  out.reserve(ok.size() + failed.size());
  while (!ok.empty()) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& m : ok) best = std::max(best, m.d2);
    std::size_t pick = ok.size();
    for (std::size_t i = 0; i < ok.size(); ++i) {
      if (ok[i].d2 < best - epsilon) continue;
      if (pick == ok.size() || ok[i].edf < ok[pick].edf) pick = i;  // name order breaks exact ties
    }
    out.push_back(std::move(ok[pick]));
    ok.erase(ok.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  for (auto& m : failed) out.push_back(std::move(m));
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

namespace {

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs task(i) for i in [0, n) on a small pool; results are written by index
// so the outcome does not depend on scheduling.
template <typename Task>
void parallel_for(std::size_t n, unsigned workers, Task task) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double eval_d2(const FittedGam& g, const Dataset& eval) {
  const auto m = deviance(g, eval);
  if (!m.d2) throw Error(ErrorKind::Degenerate, "evaluation label has zero variance; D2 undefined");
  return *m.d2;
}

ModelSummary summarize(FittedGam g, const Dataset& eval, const ScalingParams& scaling) {
  ModelSummary s;
  g.scaling = scaling;
  s.features = g.features();
  s.d2 = eval_d2(g, eval);
  s.edf = g.edf_total;
  for (const auto& f : s.features) s.shapes.push_back(shape(g, f));
  s.model = std::move(g);
  return s;
}

}  // namespace

Step1Result step1_search(const Dataset& train, const Dataset& eval, const CandidateSet& cand,
                         const DetectionConfig& cfg) {
  cfg.validate();
  if (cand.size() == 0) throw Error(ErrorKind::Config, "empty candidate set");
  if (cand.size() > cfg.max_candidates || cand.size() > kMaxCandidates)
    throw Error(ErrorKind::Config,
                fmt::format("{} candidates exceed the limit of {}", cand.size(), std::min(cfg.max_candidates, kMaxCandidates)));

  const DesignCache cache(train, cand.features, cfg.gam);
  const std::size_t n_subsets = (std::size_t{1} << cand.size()) - 1;
  std::vector<RankedModel> models(n_subsets);

  parallel_for(n_subsets, resolve_workers(cfg.workers), [&](std::size_t i) {
    const std::size_t mask = i + 1;
    RankedModel& m = models[i];
    for (std::size_t j = 0; j < cand.size(); ++j)
      if (mask & (std::size_t{1} << j)) m.features.push_back(cand.features[j]);
    m.name = subset_name(m.features);
    try {
      const auto g = cache.fit_optimized(m.features);
      m.edf = g.edf_total;
      m.d2_train = g.d2_train;
      m.d2 = eval_d2(g, eval);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularFit && e.kind() != ErrorKind::Degenerate) throw;
      m.failed = true;
      m.diagnostic = e.what();
      log::warn("subset '{}' failed: {}", m.name, e.what());
    }
  });

  Step1Result out;
  out.ranked = rank_models(std::move(models), cfg.d2_tie_window);
  const auto& top = out.ranked.front();
  if (!top.failed && top.d2 >= cfg.d2_threshold) out.defining = top.features;
  return out;
}

std::optional<double> nullification_score(const FittedGam& g, std::string_view feature) {
  const auto& t = g.term(feature);
  if (!(g.fitted_sd > 0.0)) return std::nullopt;
  return t.shape_sd / g.fitted_sd;
}

Step2Result step2_nullify(const Dataset& train, const Dataset& eval, std::span<const std::string> defining,
                          const CandidateSet& cand, const DetectionConfig& cfg, const ScalingParams& scaling) {
  if (defining.empty()) throw Error(ErrorKind::Detection, "step 2 needs a non-empty defining set");
  const auto is_defining = [&](const std::string& f) {
    return std::find(defining.begin(), defining.end(), f) != defining.end();
  };
  std::vector<std::string> extended(defining.begin(), defining.end());
  std::vector<std::string> rest;
  for (const auto& f : cand.features)
    if (!is_defining(f)) {
      extended.push_back(f);
      rest.push_back(f);
    }

  const DesignCache cache(train, extended, cfg.gam);
  const auto g = cache.fit_optimized(extended);

  Step2Result out;
  out.confirmed = true;
  for (const auto& f : extended) {
    NullificationScore s{f, is_defining(f), nullification_score(g, f)};
    if (!s.score) {
      out.confirmed = false;
    } else if (s.defining ? *s.score < cfg.nullification_threshold : *s.score >= cfg.nullification_threshold) {
      out.confirmed = false;
    }
    out.scores.push_back(std::move(s));
  }
  out.extended = summarize(g, eval, scaling);
  if (!rest.empty()) out.defining_free = summarize(cache.fit_optimized(rest), eval, scaling);
  return out;
}

DetectionReport detect(const Dataset& train, const Dataset& eval, const DetectionConfig& cfg,
                       std::optional<CandidateSet> candidates) {
  cfg.validate();
  if (train.n_rows() == 0 || eval.n_rows() == 0) throw Error(ErrorKind::Data, "training and evaluation sets must be non-empty");

  DetectionReport r;
  r.target = train.label_name;
  r.n_train = train.n_rows();
  r.n_eval = eval.n_rows();
  r.config = cfg;
  r.candidates = candidates ? std::move(*candidates) : pearson_rank(train, train.label, cfg.max_candidates);
  if (r.candidates.size() > cfg.max_candidates)
    throw Error(ErrorKind::Config, fmt::format("{} candidates exceed --max-candidates {}", r.candidates.size(),
                                               cfg.max_candidates));

  // Only the candidate columns are standardized; others may be constant.
  const auto restrict = [&](const Dataset& d) {
    Dataset out;
    out.label_name = d.label_name;
    out.label = d.label;
    out.group_name = d.group_name;
    out.group_id = d.group_id;
    for (const auto& f : r.candidates.features) {
      const auto* c = d.find(f);
      if (c == nullptr) throw Error(ErrorKind::Config, fmt::format("candidate '{}' missing from data", f));
      out.columns.push_back(*c);
    }
    return out;
  };
  if (r.candidates.correlations.size() != r.candidates.size()) {
    r.candidates.correlations.clear();
    for (const auto& f : r.candidates.features) {
      const auto* c = train.find(f);
      if (c == nullptr) throw Error(ErrorKind::Config, fmt::format("candidate '{}' missing from data", f));
      r.candidates.correlations.push_back(pearson(c->values, train.label));
    }
  }
  auto [train_z, scaling] = standardize(restrict(train));
  const auto eval_z = apply_scaling(restrict(eval), scaling);
  r.scaling = scaling;

  r.step1 = step1_search(train_z, eval_z, r.candidates, cfg);
  if (r.step1.defining) r.step2 = step2_nullify(train_z, eval_z, *r.step1.defining, r.candidates, cfg, scaling);
  return r;
}

}  // namespace gamaudit
