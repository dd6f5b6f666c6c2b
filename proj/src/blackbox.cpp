#include "gamaudit/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gamaudit/error.hpp"
#include "gamaudit/log.hpp"
#include "gamaudit/rng.hpp"

namespace gamaudit {

using nlohmann::json;

namespace {

// Row-major input matrix (rows x features) on the model scale.
Eigen::MatrixXd input_matrix(const StubModel& m, const Dataset& d, const std::string& ablate) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.n_rows()), static_cast<Eigen::Index>(m.features.size()));
  for (std::size_t j = 0; j < m.features.size(); ++j) {
    const auto* col = d.find(m.features[j]);
    if (col == nullptr)
      throw Error(ErrorKind::Prediction, fmt::format("input data lacks model feature '{}'", m.features[j]));
    const bool zero = m.features[j] == ablate;
    for (std::size_t i = 0; i < d.n_rows(); ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          zero ? 0.0 : m.scaling.to_standard(m.features[j], col->values[i]);
  }
  return x;
}

Eigen::VectorXd forward(const StubModel& m, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd h = ((x * m.w1.transpose()).rowwise() + m.b1.transpose()).cwiseMax(0.0);
  return (h * m.w2).array() + m.b2;
}

}  // namespace

StubModel train_stub(const Dataset& train, std::span<const std::string> features, const StubConfig& cfg) {
  if (features.empty()) throw Error(ErrorKind::Config, "stub needs at least one input feature");
  if (cfg.hidden <= 0 || cfg.epochs <= 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0))
    throw Error(ErrorKind::Config, "stub hyperparameters must be positive");

  StubModel m;
  m.features.assign(features.begin(), features.end());
  m.config = cfg;
  {
    Dataset inputs;
    inputs.label = train.label;
    for (const auto& f : m.features) {
      const auto* c = train.find(f);
      if (c == nullptr) throw Error(ErrorKind::Config, fmt::format("training data has no feature '{}'", f));
      inputs.columns.push_back(*c);
    }
    m.scaling = standardize(inputs).second;
  }
  const Eigen::MatrixXd x = input_matrix(m, train, {});
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(train.label.data(), static_cast<Eigen::Index>(train.n_rows()));
  const auto n = x.rows();
  const auto d = x.cols();
  const auto h = static_cast<Eigen::Index>(cfg.hidden);

  Rng rng(cfg.seed);
  // He initialization for the ReLU layer, Glorot-style scale for the output.
  m.w1.resize(h, d);
  for (Eigen::Index i = 0; i < h; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m.w1(i, j) = rng.normal() * std::sqrt(2.0 / static_cast<double>(d));
  m.b1 = Eigen::VectorXd::Zero(h);
  m.w2.resize(h);
  for (Eigen::Index i = 0; i < h; ++i) m.w2(i) = rng.normal() * std::sqrt(1.0 / static_cast<double>(h));
  m.b2 = y.mean();

  Eigen::MatrixXd v_w1 = Eigen::MatrixXd::Zero(h, d);
  Eigen::VectorXd v_b1 = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd v_w2 = Eigen::VectorXd::Zero(h);
  double v_b2 = 0.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index bs = std::min(batch, n - start);
      xb.resize(bs, d);
      yb.resize(bs);
      for (Eigen::Index r = 0; r < bs; ++r) {
        const auto src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = x.row(src);
        yb(r) = y(src);
      }
      const Eigen::MatrixXd pre = (xb * m.w1.transpose()).rowwise() + m.b1.transpose();
      const Eigen::MatrixXd act = pre.cwiseMax(0.0);
      const Eigen::VectorXd out = (act * m.w2).array() + m.b2;
      const Eigen::VectorXd err = out - yb;
      loss_sum += err.squaredNorm();

      // d(mean squared error)/d(out) = 2 err / bs
      const Eigen::VectorXd g_out = err * (2.0 / static_cast<double>(bs));
      const Eigen::VectorXd g_w2 = act.transpose() * g_out;
      const double g_b2 = g_out.sum();
      const Eigen::MatrixXd g_act = g_out * m.w2.transpose();
      const Eigen::MatrixXd g_pre = (pre.array() > 0.0).cast<double>() * g_act.array();
      const Eigen::MatrixXd g_w1 = g_pre.transpose() * xb;
      const Eigen::VectorXd g_b1 = g_pre.colwise().sum().transpose();

      v_w1 = cfg.momentum * v_w1 - cfg.learning_rate * g_w1;
      v_b1 = cfg.momentum * v_b1 - cfg.learning_rate * g_b1;
      v_w2 = cfg.momentum * v_w2 - cfg.learning_rate * g_w2;
      v_b2 = cfg.momentum * v_b2 - cfg.learning_rate * g_b2;
      m.w1 += v_w1;
      m.b1 += v_b1;
      m.w2 += v_w2;
      m.b2 += v_b2;
    }
    m.final_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(m.final_loss))
      throw Error(ErrorKind::Training,
                  fmt::format("training diverged at epoch {} (loss not finite); try a smaller learning rate", epoch + 1));
    log::debug("stub epoch {} loss {:.6f}", epoch + 1, m.final_loss);
  }
  return m;
}

std::vector<double> predict_stub(const StubModel& m, const Dataset& d, const std::string& ablate) {
  const auto out = forward(m, input_matrix(m, d, ablate));
  return std::vector<double>(out.data(), out.data() + out.size());
}

double round_score(double prediction) { return std::clamp(std::round(prediction), 0.0, 4.0); }

std::vector<double> predict_scores(const StubModel& m, const Dataset& d, const std::string& ablate) {
  auto p = predict_stub(m, d, ablate);
  for (auto& v : p) v = round_score(v);
  return p;
}

double score_accuracy(std::span<const double> scores, std::span<const double> label) {
  if (scores.size() != label.size()) throw Error(ErrorKind::Data, "prediction and label lengths differ");
  if (scores.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hit += scores[i] == label[i];
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

json to_json(const StubModel& m) {
  json w1 = json::array();
  for (Eigen::Index i = 0; i < m.w1.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.w1.cols()));
    for (Eigen::Index j = 0; j < m.w1.cols(); ++j) row[static_cast<std::size_t>(j)] = m.w1(i, j);
    w1.push_back(row);
  }
  return {{"architecture", "one hidden ReLU layer, mean squared error"},
          {"features", m.features},
          {"scaling", to_json(m.scaling)},
          {"w1", w1},
          {"b1", std::vector<double>(m.b1.data(), m.b1.data() + m.b1.size())},
          {"w2", std::vector<double>(m.w2.data(), m.w2.data() + m.w2.size())},
          {"b2", m.b2},
          {"training",
           {{"hidden", m.config.hidden},
            {"epochs", m.config.epochs},
            {"learning_rate", m.config.learning_rate},
            {"momentum", m.config.momentum},
            {"batch_size", m.config.batch_size},
            {"seed", m.config.seed},
            {"final_loss", m.final_loss}}}};
}

StubModel stub_from_json(const json& j) {
  try {
    StubModel m;
    m.features = j.at("features").get<std::vector<std::string>>();
    m.scaling = scaling_from_json(j.at("scaling"));
    const auto& t = j.at("training");
    m.config.hidden = t.at("hidden");
    m.config.epochs = t.at("epochs");
    m.config.learning_rate = t.at("learning_rate");
    m.config.momentum = t.at("momentum");
    m.config.batch_size = t.at("batch_size");
    m.config.seed = t.at("seed");
    m.final_loss = t.at("final_loss");
    const auto h = static_cast<Eigen::Index>(m.config.hidden);
    const auto d = static_cast<Eigen::Index>(m.features.size());
    const auto& w1 = j.at("w1");
    if (static_cast<Eigen::Index>(w1.size()) != h) throw Error(ErrorKind::Parse, "w1 row count mismatch");
    m.w1.resize(h, d);
    for (Eigen::Index i = 0; i < h; ++i) {
      const auto row = w1[static_cast<std::size_t>(i)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != d) throw Error(ErrorKind::Parse, "w1 column count mismatch");
      for (Eigen::Index c = 0; c < d; ++c) m.w1(i, c) = row[static_cast<std::size_t>(c)];
    }
    const auto b1 = j.at("b1").get<std::vector<double>>();
    const auto w2 = j.at("w2").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(b1.size()) != h || static_cast<Eigen::Index>(w2.size()) != h)
      throw Error(ErrorKind::Parse, "hidden layer size mismatch");
    m.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), h);
    m.w2 = Eigen::Map<const Eigen::VectorXd>(w2.data(), h);
    m.b2 = j.at("b2");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("malformed stub model: {}", e.what()));
  }
}

DetectionReport audit(const Dataset& inputs, const DetectionConfig& cfg, const AuditOptions& options) {
  for (const double v : inputs.label)
    if (!std::isfinite(v)) throw Error(ErrorKind::Data, "predictions must be finite");
  auto candidates = pearson_rank(inputs, inputs.label, cfg.max_candidates);
  auto [train, eval] = split_by_group(inputs, options.eval_fraction, options.seed);
  return detect(train, eval, cfg, std::move(candidates));
}

namespace {

std::array<std::size_t, 5> histogram(std::span<const double> scores) {
  std::array<std::size_t, 5> h{};
  for (const double s : scores) ++h[static_cast<std::size_t>(s)];
  return h;
}

}  // namespace

AblationReport ablate(const StubModel& m, const Dataset& test, const std::string& feature) {
  if (!test.has_column(feature))
    throw Error(ErrorKind::Prediction, fmt::format("cannot ablate '{}': no such column in the data", feature));
  if (std::find(m.features.begin(), m.features.end(), feature) == m.features.end())
    log::warn("'{}' is not a model input; ablation leaves predictions unchanged", feature);

  AblationReport r;
  r.feature = feature;
  r.n = test.n_rows();
  const auto before = predict_scores(m, test);
  const auto after = predict_scores(m, test, feature);
  r.accuracy_before = score_accuracy(before, test.label);
  r.accuracy_after = score_accuracy(after, test.label);
  r.histogram_before = histogram(before);
  r.histogram_after = histogram(after);

  std::array<std::size_t, 5> gold{};
  for (const double y : test.label) {
    const double s = round_score(y);
    if (s == y) ++gold[static_cast<std::size_t>(s)];
  }
  const auto n = static_cast<double>(std::max<std::size_t>(r.n, 1));
  r.majority_frequency = static_cast<double>(*std::max_element(gold.begin(), gold.end())) / n;
  const auto mode = std::max_element(r.histogram_after.begin(), r.histogram_after.end());
  r.mode_after = static_cast<int>(mode - r.histogram_after.begin());
  r.mode_share_after = static_cast<double>(*mode) / n;
  return r;
}

json to_json(const AblationReport& r) {
  return {{"feature", r.feature},
          {"rows", r.n},
          {"ablation", "standardized feature set to 0"},
          {"accuracy_before", r.accuracy_before},
          {"accuracy_after", r.accuracy_after},
          {"majority_class_frequency", r.majority_frequency},
          {"histogram_before", r.histogram_before},
          {"histogram_after", r.histogram_after},
          {"mode_after", r.mode_after},
          {"mode_share_after", r.mode_share_after}};
}

}  // namespace gamaudit
