#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bpadv/classifier.hpp"
#include "bpadv/instances.hpp"

namespace bpadv {

/// Parameters of the one-hidden-layer tanh perceptron with a 2-way softmax
/// head (row 0 = BF, row 1 = FF).
template <typename Scalar>
struct MlpParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix W1;  // hidden x features
  Vector b1;
  Matrix W2;  // 2 x hidden
  Vector b2;

  template <typename Other>
  MlpParams<Other> cast() const {
    return {W1.template cast<Other>(), b1.template cast<Other>(),
            W2.template cast<Other>(), b2.template cast<Other>()};
  }
  bool operator==(const MlpParams& o) const {
    return W1 == o.W1 && b1 == o.b1 && W2 == o.W2 && b2 == o.b2;
  }
};

/// Softmax output for every column of `features`; returns a 2 x N matrix.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, Eigen::Dynamic> mlp_probabilities(
    const MlpParams<Scalar>& p,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& features) {
  using Matrix = typename MlpParams<Scalar>::Matrix;
  const Matrix hidden =
      ((p.W1 * features).colwise() + p.b1).array().tanh().matrix();
  Matrix logits = (p.W2 * hidden).colwise() + p.b2;
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> probs(2, features.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Scalar m = logits.col(c).maxCoeff();
    using std::exp;
    const Scalar e0 = exp(logits(0, c) - m), e1 = exp(logits(1, c) - m);
    probs(0, c) = e0 / (e0 + e1);
    probs(1, c) = e1 / (e0 + e1);
  }
  return probs;
}

/// Mean cross-entropy plus (l2 / 2) * (|W1|^2 + |W2|^2). Labels are 0 (BF)
/// or 1 (FF), one per column of `features`. Fills `grad` when non-null.
template <typename Scalar>
Scalar mlp_loss(const MlpParams<Scalar>& p,
                const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>&
                    features,
                std::span<const int> labels, Scalar l2,
                MlpParams<Scalar>* grad) {
  using Matrix = typename MlpParams<Scalar>::Matrix;
  const auto n = features.cols();
  const Matrix hidden =
      ((p.W1 * features).colwise() + p.b1).array().tanh().matrix();
  const Matrix logits = (p.W2 * hidden).colwise() + p.b2;
  Matrix delta(2, n);  // d loss / d logits, before the 1/n factor
  Scalar loss(0);
  using std::exp;
  using std::log;
  for (Eigen::Index c = 0; c < n; ++c) {
    const Scalar m = logits.col(c).maxCoeff();
    const Scalar lse = m + log(exp(logits(0, c) - m) + exp(logits(1, c) - m));
    const int y = labels[static_cast<std::size_t>(c)];
    loss -= logits(y, c) - lse;
    for (int k = 0; k < 2; ++k)
      delta(k, c) = exp(logits(k, c) - lse) - (k == y ? Scalar(1) : Scalar(0));
  }
  const Scalar inv_n = Scalar(1) / Scalar(n);
  loss = loss * inv_n +
         l2 / Scalar(2) * (p.W1.squaredNorm() + p.W2.squaredNorm());
  if (grad) {
    delta *= inv_n;
    grad->W2 = delta * hidden.transpose() + l2 * p.W2;
    grad->b2 = delta.rowwise().sum();
    const Matrix d_hidden = (p.W2.transpose() * delta).array() *
                            (Scalar(1) - hidden.array().square());
    grad->W1 = d_hidden * features.transpose() + l2 * p.W1;
    grad->b1 = d_hidden.rowwise().sum();
  }
  return loss;
}

struct SurrogateConfig {
  std::size_t hidden = 32;
  std::size_t epochs = 3000;
  double learning_rate = 0.5;
  double momentum = 0.9;
  double l2 = 1e-5;
  std::uint64_t seed = 1;
};

/// Fixed-length surrogate classifier over a feature embedding of the
/// item sequence: items scaled to [-1, 1] (padded with 0 or truncated to
/// n_items) followed by the mean scaled size of each quarter prefix.
class SurrogateModel {
 public:
  static constexpr int kPrefixFeatures = 4;

  SurrogateModel() = default;
  SurrogateModel(std::size_t n_items, SizeBounds bounds,
                 MlpParams<double> params);

  std::size_t n_items() const { return n_items_; }
  SizeBounds bounds() const { return bounds_; }
  const MlpParams<double>& params() const { return params_; }
  std::size_t n_features() const { return n_items_ + kPrefixFeatures; }

  Eigen::VectorXd features(std::span<const int> items) const;
  double probability_bf(std::span<const int> items) const;

  bool operator==(const SurrogateModel& o) const {
    return n_items_ == o.n_items_ && bounds_.min_size == o.bounds_.min_size &&
           bounds_.max_size == o.bounds_.max_size && params_ == o.params_;
  }

 private:
  std::size_t n_items_ = 0;
  SizeBounds bounds_;
  MlpParams<double> params_;
};

struct SurrogateFit {
  SurrogateModel model;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

/// Full-batch gradient descent with momentum. Deterministic in config.seed.
/// Throws DegenerateDatasetError unless both winners are present.
SurrogateFit train_surrogate(const std::vector<LabeledInstance>& data,
                             const SurrogateConfig& config,
                             SizeBounds bounds = {});

/// Fraction of instances whose argmax matches the stored winner.
double surrogate_accuracy(const SurrogateModel& model,
                          const std::vector<LabeledInstance>& data);

std::string surrogate_to_json(const SurrogateModel& m, double train_accuracy);
SurrogateModel surrogate_from_json(const std::string& text);
void save_surrogate(const SurrogateModel& m, double train_accuracy,
                    const std::filesystem::path& path);
SurrogateModel load_surrogate(const std::filesystem::path& path);

/// Immutable after construction; safe for concurrent predict().
class SurrogateBackend final : public Backend {
 public:
  explicit SurrogateBackend(SurrogateModel model) : model_(std::move(model)) {}
  const SurrogateModel& model() const { return model_; }
  std::optional<std::size_t> expected_length() const override {
    return model_.n_items();
  }

 protected:
  double probability_bf(std::span<const int> items, std::string_view) override {
    return model_.probability_bf(items);
  }

 private:
  SurrogateModel model_;
};

}  // namespace bpadv
