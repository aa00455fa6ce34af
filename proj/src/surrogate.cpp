#include "bpadv/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "bpadv/errors.hpp"
#include "bpadv/json_util.hpp"
#include "bpadv/random.hpp"

namespace bpadv {

SurrogateModel::SurrogateModel(std::size_t n_items, SizeBounds bounds,
                               MlpParams<double> params)
    : n_items_(n_items), bounds_(bounds), params_(std::move(params)) {
  const auto f = static_cast<Eigen::Index>(n_features());
  const auto h = params_.W1.rows();
  if (n_items_ == 0) throw SchemaError("n_items", "must be positive");
  if (bounds_.max_size <= bounds_.min_size)
    throw SchemaError("max_size", "must exceed min_size");
  if (h < 1) throw SchemaError("W1", "needs at least one hidden unit");
  if (params_.W1.cols() != f)
    throw SchemaError("W1", "expected " + std::to_string(f) + " columns");
  if (params_.b1.size() != h) throw SchemaError("b1", "length mismatch");
  if (params_.W2.rows() != 2 || params_.W2.cols() != h)
    throw SchemaError("W2", "expected shape (2, hidden)");
  if (params_.b2.size() != 2) throw SchemaError("b2", "expected length 2");
}

Eigen::VectorXd SurrogateModel::features(std::span<const int> items) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features()));
  const double lo = bounds_.min_size;
  const double span = bounds_.max_size - bounds_.min_size;
  const std::size_t n = items.size();
  for (std::size_t j = 0; j < std::min(n, n_items_); ++j)
    f(static_cast<Eigen::Index>(j)) = 2.0 * (items[j] - lo) / span - 1.0;
  if (n == 0) return f;
  double prefix = 0.0;
  std::size_t consumed = 0;
  for (int q = 1; q <= kPrefixFeatures; ++q) {
    const std::size_t end = (n * static_cast<std::size_t>(q) +
                             kPrefixFeatures - 1) / kPrefixFeatures;
    for (; consumed < end; ++consumed)
      prefix += 2.0 * (items[consumed] - lo) / span - 1.0;
    f(static_cast<Eigen::Index>(n_items_) + q - 1) =
        prefix / static_cast<double>(end);
  }
  return f;
}

double SurrogateModel::probability_bf(std::span<const int> items) const {
  const Eigen::VectorXd hidden =
      (params_.W1 * features(items) + params_.b1).array().tanh().matrix();
  const Eigen::Vector2d logits = params_.W2 * hidden + params_.b2;
  const double d = logits(1) - logits(0);
  return d >= 0.0 ? std::exp(-d) / (1.0 + std::exp(-d))
                  : 1.0 / (1.0 + std::exp(d));
}

namespace {

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                         double scale) {
  Eigen::MatrixXd m(rows, cols);
  // Column-major fill order is part of the determinism contract.
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
  return m;
}

}  // namespace

double surrogate_accuracy(const SurrogateModel& model,
                          const std::vector<LabeledInstance>& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& rec : data) {
    const double p = model.probability_bf(rec.items());
    const Solver choice = p > 0.5 ? Solver::BF : Solver::FF;
    if (p != 0.5 && choice == rec.winner) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

SurrogateFit train_surrogate(const std::vector<LabeledInstance>& data,
                             const SurrogateConfig& config,
                             SizeBounds bounds) {
  if (data.empty()) throw DegenerateDatasetError("empty training set");
  bool has_bf = false, has_ff = false;
  for (const auto& rec : data)
    (rec.winner == Solver::BF ? has_bf : has_ff) = true;
  if (!has_bf || !has_ff)
    throw DegenerateDatasetError("training set needs both BF and FF winners");
  if (config.hidden == 0) throw ConfigError("surrogate hidden size must be > 0");

  const std::size_t n_items = data.front().items().size();
  const auto hidden = static_cast<Eigen::Index>(config.hidden);
  SurrogateModel shape(n_items, bounds,
                       {Eigen::MatrixXd::Zero(hidden, static_cast<Eigen::Index>(
                                                          n_items + SurrogateModel::kPrefixFeatures)),
                        Eigen::VectorXd::Zero(hidden),
                        Eigen::MatrixXd::Zero(2, hidden),
                        Eigen::VectorXd::Zero(2)});
  const auto n_features = static_cast<Eigen::Index>(shape.n_features());
  const auto n = static_cast<Eigen::Index>(data.size());

  Eigen::MatrixXd X(n_features, n);
  std::vector<int> labels(data.size());
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& rec = data[static_cast<std::size_t>(c)];
    X.col(c) = shape.features(rec.items());
    labels[static_cast<std::size_t>(c)] = rec.winner == Solver::BF ? 0 : 1;
  }

  Rng rng(config.seed);
  MlpParams<double> p{
      gaussian(rng, hidden, n_features, 1.0 / std::sqrt(double(n_features))),
      Eigen::VectorXd::Zero(hidden),
      gaussian(rng, 2, hidden, 1.0 / std::sqrt(double(hidden))),
      Eigen::VectorXd::Zero(2)};
  MlpParams<double> velocity{Eigen::MatrixXd::Zero(hidden, n_features),
                             Eigen::VectorXd::Zero(hidden),
                             Eigen::MatrixXd::Zero(2, hidden),
                             Eigen::VectorXd::Zero(2)};
  MlpParams<double> grad = velocity;

  double loss = 0.0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    loss = mlp_loss(p, X, labels, config.l2, &grad);
    const double mu = config.momentum, lr = config.learning_rate;
    velocity.W1 = mu * velocity.W1 - lr * grad.W1;
    velocity.b1 = mu * velocity.b1 - lr * grad.b1;
    velocity.W2 = mu * velocity.W2 - lr * grad.W2;
    velocity.b2 = mu * velocity.b2 - lr * grad.b2;
    p.W1 += velocity.W1;
    p.b1 += velocity.b1;
    p.W2 += velocity.W2;
    p.b2 += velocity.b2;
  }
  loss = mlp_loss<double>(p, X, labels, config.l2, nullptr);

  SurrogateFit fit{SurrogateModel(n_items, bounds, std::move(p)), 0.0, loss};
  fit.train_accuracy = surrogate_accuracy(fit.model, data);
  return fit;
}

namespace {

Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd parse_matrix(const Json& j, const char* name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw SchemaError(name, "expected an array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                    static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != j[0].size())
      throw SchemaError(name, "ragged row " + std::to_string(r));
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
  }
  return m;
}

const Json& field(const Json& j, const char* name) {
  if (!j.contains(name)) throw SchemaError(name, "missing");
  return j.at(name);
}

}  // namespace

std::string surrogate_to_json(const SurrogateModel& m, double train_accuracy) {
  Json j;
  j["kind"] = "mlp_surrogate";
  j["n_items"] = m.n_items();
  j["min_size"] = m.bounds().min_size;
  j["max_size"] = m.bounds().max_size;
  j["hidden"] = m.params().W1.rows();
  j["train_accuracy"] = train_accuracy;
  j["W1"] = matrix_json(m.params().W1);
  j["b1"] = std::vector<double>(m.params().b1.data(),
                                m.params().b1.data() + m.params().b1.size());
  j["W2"] = matrix_json(m.params().W2);
  j["b2"] = std::vector<double>(m.params().b2.data(),
                                m.params().b2.data() + m.params().b2.size());
  return j.dump();
}

SurrogateModel surrogate_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError("<document>", e.what());
  }
  try {
    if (field(j, "kind") != "mlp_surrogate")
      throw SchemaError("kind", "expected \"mlp_surrogate\"");
    MlpParams<double> p;
    p.W1 = parse_matrix(field(j, "W1"), "W1");
    p.W2 = parse_matrix(field(j, "W2"), "W2");
    const auto b1 = field(j, "b1").get<std::vector<double>>();
    const auto b2 = field(j, "b2").get<std::vector<double>>();
    p.b1 = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<Eigen::Index>(b1.size()));
    p.b2 = Eigen::Map<const Eigen::VectorXd>(b2.data(), static_cast<Eigen::Index>(b2.size()));
    return SurrogateModel(field(j, "n_items").get<std::size_t>(),
                          {field(j, "min_size").get<int>(),
                           field(j, "max_size").get<int>()},
                          std::move(p));
  } catch (const Json::exception& e) {
    throw SchemaError("<document>", e.what());
  }
}

void save_surrogate(const SurrogateModel& m, double train_accuracy,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << surrogate_to_json(m, train_accuracy) << '\n';
}

SurrogateModel load_surrogate(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return surrogate_from_json(ss.str());
}

}  // namespace bpadv
