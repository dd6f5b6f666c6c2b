// gam-audit: generate labeled data, detect defining features, audit
// black-box predictions, and plot feature shapes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "gamaudit/blackbox.hpp"
#include "gamaudit/detect.hpp"
#include "gamaudit/error.hpp"
#include "gamaudit/log.hpp"
#include "gamaudit/svg.hpp"
#include "gamaudit/synth.hpp"

namespace fs = std::filesystem;
using namespace gamaudit;
using nlohmann::json;

namespace {

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Config, fmt::format("cannot create directory '{}': {}", path.parent_path().string(), ec.message()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Config, fmt::format("cannot write '{}'", path.string()));
  out << content;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, fmt::format("cannot open '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, fmt::format("'{}' is not valid JSON: {}", path, e.what()));
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// File-safe version of a feature name.
std::string slug(const std::string& s) {
  std::string out;
  for (const char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

// Options shared by detect and audit. Values from --config are applied first,
// then any flag given on the command line.
struct DetectOptions {
  std::string config_path;
  std::string out;
  std::string label;
  std::string group = "pid";
  std::string candidates;
  double delta = 0.95;
  double epsilon = 0.005;
  double tau = 0.05;
  std::size_t max_candidates = 5;
  int basis_size = 20;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

void add_detect_flags(CLI::App* cmd, DetectOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON file with run settings")->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Output directory")->required();
  cmd->add_option("--delta", o.delta, "D2 threshold for a defining set");
  cmd->add_option("--epsilon", o.epsilon, "D2 window treated as a tie");
  cmd->add_option("--tau", o.tau, "Nullification threshold");
  cmd->add_option("--max-candidates", o.max_candidates, "Candidate features ranked by |Pearson r| (at most 8)");
  cmd->add_option("--candidates", o.candidates, "Comma-separated candidate list (skips ranking)");
  cmd->add_option("--basis-size", o.basis_size, "Cubic B-spline basis functions per continuous feature");
  cmd->add_option("--test-fraction", o.test_fraction, "Share of groups held out for evaluation");
  cmd->add_option("--seed", o.seed, "Seed for the group split");
  cmd->add_option("--workers", o.workers, "Parallel subset fits (0 = all cores)");
  cmd->add_option("--group", o.group, "Group (patient) id column; empty for one group per row");
}

void apply_run_config(CLI::App* cmd, DetectOptions& o) {
  if (o.config_path.empty()) return;
  const auto j = read_json(o.config_path);
  if (!j.is_object()) throw Error(ErrorKind::Config, "run config must be a JSON object");
  const auto unset = [&](const char* flag) { return cmd->count(flag) == 0; };
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "d2_threshold") {
        if (unset("--delta")) o.delta = value.get<double>();
      } else if (key == "d2_tie_window") {
        if (unset("--epsilon")) o.epsilon = value.get<double>();
      } else if (key == "nullification_threshold") {
        if (unset("--tau")) o.tau = value.get<double>();
      } else if (key == "max_candidates") {
        if (unset("--max-candidates")) o.max_candidates = value.get<std::size_t>();
      } else if (key == "candidates") {
        if (unset("--candidates")) {
          o.candidates.clear();
          for (const auto& c : value) o.candidates += c.get<std::string>() + ",";
        }
      } else if (key == "basis_size") {
        if (unset("--basis-size")) o.basis_size = value.get<int>();
      } else if (key == "test_fraction") {
        if (unset("--test-fraction")) o.test_fraction = value.get<double>();
      } else if (key == "seed") {
        if (unset("--seed")) o.seed = value.get<std::uint64_t>();
      } else if (key == "workers") {
        if (unset("--workers")) o.workers = value.get<unsigned>();
      } else if (key == "label" && cmd->get_option_no_throw("--label") != nullptr) {
        if (unset("--label")) o.label = value.get<std::string>();
      } else if (key == "group") {
        if (unset("--group")) o.group = value.get<std::string>();
      } else {
        throw Error(ErrorKind::Config, fmt::format("unknown key '{}' in run config", key));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, fmt::format("bad value in run config: {}", e.what()));
  }
}

DetectionConfig detection_config(const DetectOptions& o) {
  DetectionConfig c;
  c.d2_threshold = o.delta;
  c.d2_tie_window = o.epsilon;
  c.nullification_threshold = o.tau;
  c.max_candidates = o.max_candidates;
  c.gam.basis_size = o.basis_size;
  c.workers = o.workers;
  if (!o.candidates.empty()) {
    const auto names = split_list(o.candidates);
    if (names.size() > kMaxCandidates)
      throw Error(ErrorKind::Config, fmt::format("{} candidates given; at most {} are searched", names.size(), kMaxCandidates));
    c.max_candidates = std::max(c.max_candidates, names.size());
  }
  c.validate();
  return c;
}

std::optional<CandidateSet> explicit_candidates(const DetectOptions& o, const Dataset& d) {
  if (o.candidates.empty()) return std::nullopt;
  CandidateSet c;
  c.features = split_list(o.candidates);
  for (const auto& f : c.features) {
    if (!d.has_column(f)) throw Error(ErrorKind::Config, fmt::format("candidate '{}' is not a column", f));
    c.correlations.push_back(pearson(d.column(f).values, d.label));
  }
  return c;
}

void write_shapes(const fs::path& dir, const ModelSummary& m) {
  for (const auto& s : m.shapes) {
    write_file(dir / (slug(s.feature) + ".csv"), svg::shape_csv(s));
    write_file(dir / (slug(s.feature) + ".svg"), svg::shape_chart(s, s.feature));
  }
}

void write_report(const fs::path& out, const DetectionReport& r) {
  write_file(out / "report.json", to_json(r).dump(2) + "\n");
  write_file(out / "report.txt", to_text(r));
  write_file(out / "scaling.json", to_json(r.scaling).dump(2) + "\n");
  if (!r.step2) return;
  write_file(out / "models" / "extended.json", to_json(r.step2->extended.model).dump() + "\n");
  write_shapes(out / "shapes" / "extended", r.step2->extended);
  std::vector<svg::PanelColumn> columns;
  if (r.step2->defining_free) {
    write_file(out / "models" / "defining_free.json", to_json(r.step2->defining_free->model).dump() + "\n");
    write_shapes(out / "shapes" / "defining_free", *r.step2->defining_free);
    columns.push_back({fmt::format("without defining features (D2 = {:.1f}%)", 100.0 * r.step2->defining_free->d2),
                       r.step2->defining_free->shapes});
  }
  columns.push_back({fmt::format("with defining features (D2 = {:.1f}%)", 100.0 * r.step2->extended.d2),
                     r.step2->extended.shapes});
  write_file(out / "shapes" / "overview.svg", svg::overview(columns));
}

void print_summary(const DetectionReport& r) {
  if (!r.step1.defining) {
    fmt::print("no defining set (best D2 {:.4f} < {})\n", r.step1.ranked.front().d2, r.config.d2_threshold);
    return;
  }
  fmt::print("defining set {{{}}}: {}\n", subset_name(*r.step1.defining),
             r.step2 && r.step2->confirmed ? "confirmed" : "refuted");
}

int cmd_synth(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> patients) {
  auto cfg = load_gen_config(config_path);
  if (seed) cfg.seed = *seed;
  if (patients) cfg.n_patients = *patients;
  cfg.validate();
  const auto d = generate(cfg);
  write_file(out, to_csv(d));
  const json sidecar = {{"generator", to_json(cfg)}, {"rule", to_json(*cfg.rule)}, {"rows", d.n_rows()}};
  write_file(out + ".rule.json", sidecar.dump(2) + "\n");
  fmt::print("wrote {} rows to {}\n", d.n_rows(), out);
  return 0;
}

int cmd_detect(CLI::App* cmd, DetectOptions& o, const std::string& data_path) {
  apply_run_config(cmd, o);
  if (o.label.empty()) throw Error(ErrorKind::Config, "--label is required");
  const auto cfg = detection_config(o);
  LoadOptions lo;
  lo.label_name = o.label;
  lo.group_name = o.group;
  const auto d = load_csv(data_path, lo);
  const auto cand = explicit_candidates(o, d);
  auto [train, eval] = split_by_group(d, o.test_fraction, o.seed);
  const auto r = detect(train, eval, cfg, cand);
  write_report(o.out, r);
  print_summary(r);
  return 0;
}

int cmd_audit(CLI::App* cmd, DetectOptions& o, const std::string& inputs_path, const std::string& yhat_path,
              const std::string& ignore) {
  apply_run_config(cmd, o);
  const auto cfg = detection_config(o);
  LoadOptions lo;
  lo.label_name = "";
  lo.group_name = o.group;
  lo.require_label = false;
  lo.ignore = split_list(ignore);

  Dataset inputs = load_csv(inputs_path, lo);
  // The prediction column may sit in the inputs file or in its own file.
  const std::string source = yhat_path.empty() ? inputs_path : yhat_path;
  LoadOptions yo;
  yo.label_name = "yhat";
  yo.group_name = "";
  Dataset table;
  try {
    table = load_csv(source, yo);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Config) throw;
    throw Error(ErrorKind::Data, fmt::format("'{}' must contain a numeric 'yhat' column ({})", source, e.what()));
  }
  if (yhat_path.empty()) inputs.columns.erase(std::remove_if(inputs.columns.begin(), inputs.columns.end(),
                                                             [](const Column& c) { return c.name == "yhat"; }),
                                              inputs.columns.end());
  if (table.n_rows() != inputs.n_rows())
    throw Error(ErrorKind::Data, fmt::format("{} predictions for {} input rows", table.n_rows(), inputs.n_rows()));
  inputs.label = table.label;
  inputs.label_name = "yhat";

  AuditOptions ao;
  ao.eval_fraction = o.test_fraction;
  ao.seed = o.seed;
  DetectionConfig audit_cfg = cfg;
  const auto cand = explicit_candidates(o, inputs);
  DetectionReport r;
  if (cand) {
    auto [train, eval] = split_by_group(inputs, ao.eval_fraction, ao.seed);
    r = detect(train, eval, audit_cfg, cand);
  } else {
    r = audit(inputs, audit_cfg, ao);
  }
  write_report(o.out, r);
  print_summary(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect defining features with generalized additive models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gam-audit 1.0");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  std::string synth_config, synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_patients;
  synth->add_option("--config", synth_config, "Generator config JSON")->required();
  synth->add_option("--out", synth_out, "Output CSV path")->required();
  synth->add_option("--seed", synth_seed, "Override the config seed");
  synth->add_option("--patients", synth_patients, "Override the number of patients");

  // detect
  auto* det = app.add_subcommand("detect", "Two-step detection of defining features");
  DetectOptions det_opts;
  std::string det_data;
  det->add_option("--data", det_data, "Input CSV")->required()->check(CLI::ExistingFile);
  det->add_option("--label", det_opts.label, "Label column");
  add_detect_flags(det, det_opts);

  // audit
  auto* aud = app.add_subcommand("audit", "Run detection against black-box predictions");
  DetectOptions aud_opts;
  std::string aud_inputs, aud_yhat, aud_ignore;
  aud->add_option("--inputs", aud_inputs, "CSV of model inputs")->required()->check(CLI::ExistingFile);
  aud->add_option("--yhat", aud_yhat, "CSV with a 'yhat' column, row-aligned with the inputs")->check(CLI::ExistingFile);
  aud->add_option("--ignore", aud_ignore, "Comma-separated input columns to drop (e.g. a gold label)");
  add_detect_flags(aud, aud_opts);

  // train-stub
  auto* ts = app.add_subcommand("train-stub", "Train the one-hidden-layer stand-in model");
  std::string ts_data, ts_label, ts_group = "pid", ts_out, ts_features, ts_exclude;
  StubConfig ts_cfg;
  double ts_fraction = 0.2;
  std::uint64_t ts_split_seed = 1;
  ts->add_option("--data", ts_data, "Input CSV")->required()->check(CLI::ExistingFile);
  ts->add_option("--label", ts_label, "Label column")->required();
  ts->add_option("--group", ts_group, "Group column used for the split");
  ts->add_option("--out", ts_out, "Output directory")->required();
  ts->add_option("--features", ts_features, "Comma-separated inputs (default: all)");
  ts->add_option("--exclude", ts_exclude, "Comma-separated inputs to leave out");
  ts->add_option("--epochs", ts_cfg.epochs, "Training epochs");
  ts->add_option("--lr", ts_cfg.learning_rate, "Learning rate");
  ts->add_option("--hidden", ts_cfg.hidden, "Hidden units");
  ts->add_option("--seed", ts_cfg.seed, "Initialization and shuffling seed");
  ts->add_option("--test-fraction", ts_fraction, "Share of groups held out");
  ts->add_option("--split-seed", ts_split_seed, "Seed for the group split");

  // ablate
  auto* ab = app.add_subcommand("ablate", "Accuracy with one standardized input forced to 0");
  std::string ab_model, ab_data, ab_label, ab_feature, ab_out, ab_group = "pid";
  ab->add_option("--model", ab_model, "Stub model JSON")->required()->check(CLI::ExistingFile);
  ab->add_option("--data", ab_data, "Test CSV with gold labels")->required()->check(CLI::ExistingFile);
  ab->add_option("--label", ab_label, "Gold label column")->required();
  ab->add_option("--group", ab_group, "Group column");
  ab->add_option("--feature", ab_feature, "Feature to ablate")->required();
  ab->add_option("--out", ab_out, "Output JSON path (default: stdout)");

  // shapes
  auto* sh = app.add_subcommand("shapes", "Export feature shapes of a saved GAM");
  std::string sh_model, sh_out;
  std::size_t sh_grid = 200;
  sh->add_option("--model", sh_model, "GAM JSON written by detect")->required()->check(CLI::ExistingFile);
  sh->add_option("--out", sh_out, "Output directory")->required();
  sh->add_option("--grid", sh_grid, "Grid points per feature")->check(CLI::Range(2, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_config, synth_out, synth_seed, synth_patients);
    if (det->parsed()) return cmd_detect(det, det_opts, det_data);
    if (aud->parsed()) return cmd_audit(aud, aud_opts, aud_inputs, aud_yhat, aud_ignore);

    if (ts->parsed()) {
      LoadOptions lo;
      lo.label_name = ts_label;
      lo.group_name = ts_group;
      const auto d = load_csv(ts_data, lo);
      std::vector<std::string> features = ts_features.empty() ? d.feature_names() : split_list(ts_features);
      const auto excluded = split_list(ts_exclude);
      std::erase_if(features, [&](const std::string& f) {
        return std::find(excluded.begin(), excluded.end(), f) != excluded.end();
      });
      auto [train, test] = split_by_group(d, ts_fraction, ts_split_seed);
      const auto m = train_stub(train, features, ts_cfg);
      const fs::path out(ts_out);
      write_file(out / "model.json", to_json(m).dump() + "\n");
      write_file(out / "test.csv", to_csv(test));
      const auto yhat = predict_scores(m, test);
      std::string csv = "yhat\n";
      for (const double v : yhat) csv += fmt::format("{}\n", v);
      write_file(out / "yhat.csv", csv);
      // Audit input: every feature the auditor may inspect plus the predictions, no gold label.
      Dataset audit_set = test;
      audit_set.label = yhat;
      audit_set.label_name = "yhat";
      write_file(out / "audit.csv", to_csv(audit_set));
      const double acc_train = score_accuracy(predict_scores(m, train), train.label);
      const double acc_test = score_accuracy(yhat, test.label);
      const json summary = {{"features", features},      {"train_rows", train.n_rows()}, {"test_rows", test.n_rows()},
                            {"train_accuracy", acc_train}, {"test_accuracy", acc_test},  {"final_loss", m.final_loss}};
      write_file(out / "training.json", summary.dump(2) + "\n");
      fmt::print("train accuracy {:.4f}, test accuracy {:.4f}\n", acc_train, acc_test);
      return 0;
    }

    if (ab->parsed()) {
      const auto m = stub_from_json(read_json(ab_model));
      LoadOptions lo;
      lo.label_name = ab_label;
      lo.group_name = ab_group;
      const auto d = load_csv(ab_data, lo);
      const auto r = ablate(m, d, ab_feature);
      const auto text = to_json(r).dump(2) + "\n";
      if (ab_out.empty()) {
        std::cout << text;
      } else {
        write_file(ab_out, text);
      }
      return 0;
    }

    if (sh->parsed()) {
      const auto g = gam_from_json(read_json(sh_model));
      const fs::path out(sh_out);
      svg::PanelColumn column{fmt::format("{} (train D2 = {:.1f}%)", g.label_name, 100.0 * g.d2_train), {}};
      for (const auto& f : g.features()) {
        const auto s = shape(g, f, sh_grid);
        write_file(out / (slug(f) + ".csv"), svg::shape_csv(s));
        write_file(out / (slug(f) + ".svg"), svg::shape_chart(s, f));
        column.shapes.push_back(s);
      }
      write_file(out / "overview.svg", svg::overview(std::span<const svg::PanelColumn>(&column, 1)));
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "gam-audit: %s: %s\n", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gam-audit: internal error: %s\n", e.what());
    return 4;
  }
  return 2;
}
