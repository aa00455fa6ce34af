#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bpadv/classifier.hpp"
#include "bpadv/errors.hpp"

namespace bpadv {

/// Single-layer GRU over scalar item sizes with a two-logit softmax head.
/// Head row 0 is the BF logit, row 1 the FF logit.
template <typename Scalar>
struct RecurrentWeights {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Eigen::Index input_dim = 1;
  Eigen::Index hidden_dim = 0;
  Matrix W_z, W_r, W_h;  // hidden x input
  Matrix U_z, U_r, U_h;  // hidden x hidden
  Vector b_z, b_r, b_h;  // hidden
  Matrix W_out;          // 2 x hidden
  Vector b_out;          // 2
  Scalar norm_offset = Scalar(0);
  Scalar norm_scale = Scalar(1);

  static RecurrentWeights zeros(Eigen::Index hidden, Scalar offset = Scalar(20),
                                Scalar scale = Scalar(80)) {
    RecurrentWeights w;
    w.hidden_dim = hidden;
    w.W_z = w.W_r = w.W_h = Matrix::Zero(hidden, 1);
    w.U_z = w.U_r = w.U_h = Matrix::Zero(hidden, hidden);
    w.b_z = w.b_r = w.b_h = Vector::Zero(hidden);
    w.W_out = Matrix::Zero(2, hidden);
    w.b_out = Vector::Zero(2);
    w.norm_offset = offset;
    w.norm_scale = scale;
    return w;
  }

  /// Throws SchemaError naming the first inconsistent field.
  void validate() const {
    if (input_dim != 1) throw SchemaError("input_dim", "must be 1");
    if (hidden_dim < 1) throw SchemaError("hidden_dim", "must be >= 1");
    const auto h = hidden_dim;
    const std::pair<const char*, const Matrix*> mats[] = {
        {"W_z", &W_z}, {"W_r", &W_r}, {"W_h", &W_h},
        {"U_z", &U_z}, {"U_r", &U_r}, {"U_h", &U_h}, {"W_out", &W_out}};
    for (auto [name, m] : mats) {
      const std::string n(name);
      const Eigen::Index rows = n == "W_out" ? 2 : h;
      const Eigen::Index cols = n[0] == 'U' || n == "W_out" ? h : input_dim;
      if (m->rows() != rows || m->cols() != cols)
        throw SchemaError(n, "expected shape (" + std::to_string(rows) + ", " +
                                 std::to_string(cols) + "), got (" +
                                 std::to_string(m->rows()) + ", " +
                                 std::to_string(m->cols()) + ")");
      if (!m->allFinite()) throw SchemaError(n, "non-finite entry");
    }
    const std::pair<const char*, const Vector*> vecs[] = {
        {"b_z", &b_z}, {"b_r", &b_r}, {"b_h", &b_h}, {"b_out", &b_out}};
    for (auto [name, v] : vecs) {
      const std::string n(name);
      const Eigen::Index len = n == "b_out" ? 2 : h;
      if (v->size() != len)
        throw SchemaError(n, "expected length " + std::to_string(len) +
                                 ", got " + std::to_string(v->size()));
      if (!v->allFinite()) throw SchemaError(n, "non-finite entry");
    }
    using std::isfinite;
    if (!isfinite(norm_offset)) throw SchemaError("norm.offset", "non-finite");
    if (norm_scale == Scalar(0) || !isfinite(norm_scale))
      throw SchemaError("norm.scale", "must be finite and non-zero");
  }

  bool operator==(const RecurrentWeights& o) const {
    return input_dim == o.input_dim && hidden_dim == o.hidden_dim &&
           W_z == o.W_z && W_r == o.W_r && W_h == o.W_h && U_z == o.U_z &&
           U_r == o.U_r && U_h == o.U_h && b_z == o.b_z && b_r == o.b_r &&
           b_h == o.b_h && W_out == o.W_out && b_out == o.b_out &&
           norm_offset == o.norm_offset && norm_scale == o.norm_scale;
  }
};

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) {
    using std::exp;
    return v >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-v))
                          : exp(v) / (Scalar(1) + exp(v));
  });
}

}  // namespace detail

/// One GRU step from h_prev on normalized input x.
template <typename Scalar>
typename RecurrentWeights<Scalar>::Vector gru_step(
    const RecurrentWeights<Scalar>& w,
    const typename RecurrentWeights<Scalar>::Vector& h_prev, Scalar x) {
  using Vector = typename RecurrentWeights<Scalar>::Vector;
  const Vector z = detail::sigmoid(w.W_z.col(0) * x + w.U_z * h_prev + w.b_z);
  const Vector r = detail::sigmoid(w.W_r.col(0) * x + w.U_r * h_prev + w.b_r);
  const Vector h_tilde =
      (w.W_h.col(0) * x + w.U_h * r.cwiseProduct(h_prev) + w.b_h)
          .array()
          .tanh()
          .matrix();
  return (Vector::Ones(w.hidden_dim) - z).cwiseProduct(h_prev) +
         z.cwiseProduct(h_tilde);
}

/// Runs the recurrence and returns every hidden state h_1..h_n.
template <typename Scalar>
std::vector<typename RecurrentWeights<Scalar>::Vector> gru_hidden_states(
    const RecurrentWeights<Scalar>& w, std::span<const int> items) {
  using Vector = typename RecurrentWeights<Scalar>::Vector;
  std::vector<Vector> states;
  states.reserve(items.size());
  Vector h = Vector::Zero(w.hidden_dim);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const Scalar x = (Scalar(items[t]) - w.norm_offset) / w.norm_scale;
    h = gru_step(w, h, x);
    if (!h.allFinite()) throw NumericError(t + 1, "GRU hidden state");
    states.push_back(h);
  }
  return states;
}

/// (p_BF, p_FF) for an item sequence.
template <typename Scalar>
std::pair<Scalar, Scalar> gru_forward(const RecurrentWeights<Scalar>& w,
                                      std::span<const int> items) {
  using Vector = typename RecurrentWeights<Scalar>::Vector;
  Vector h = Vector::Zero(w.hidden_dim);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const Scalar x = (Scalar(items[t]) - w.norm_offset) / w.norm_scale;
    h = gru_step(w, h, x);
    if (!h.allFinite()) throw NumericError(t + 1, "GRU hidden state");
  }
  const Vector logits = w.W_out * h + w.b_out;
  if (!logits.allFinite())
    throw NumericError(items.size(), "GRU output logits");
  using std::exp;
  // Two-way softmax in the overflow-safe logistic form.
  const Scalar d = logits(1) - logits(0);
  const Scalar p_bf = d >= Scalar(0) ? exp(-d) / (Scalar(1) + exp(-d))
                                     : Scalar(1) / (Scalar(1) + exp(d));
  return {p_bf, Scalar(1) - p_bf};
}

using GruWeights = RecurrentWeights<double>;

std::string weights_to_json(const GruWeights& w);
GruWeights weights_from_json(const std::string& text);
void save_weights(const GruWeights& w, const std::filesystem::path& path);
GruWeights load_weights(const std::filesystem::path& path);

/// Native recurrent backend; immutable, safe for concurrent predict().
class GruBackend final : public Backend {
 public:
  explicit GruBackend(GruWeights weights,
                      std::optional<std::size_t> fixed_length = std::nullopt)
      : weights_(std::move(weights)), fixed_length_(fixed_length) {
    weights_.validate();
  }

  const GruWeights& weights() const { return weights_; }
  std::optional<std::size_t> expected_length() const override {
    return fixed_length_;
  }

 protected:
  double probability_bf(std::span<const int> items, std::string_view) override {
    return gru_forward(weights_, items).first;
  }

 private:
  GruWeights weights_;
  std::optional<std::size_t> fixed_length_;
};

}  // namespace bpadv
