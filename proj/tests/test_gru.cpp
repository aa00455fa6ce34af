#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "bpadv/errors.hpp"
#include "bpadv/gru.hpp"
#include "bpadv/json_util.hpp"
#include "bpadv/random.hpp"

using namespace bpadv;

namespace {

GruWeights random_weights(Rng& rng, Eigen::Index h, double scale) {
  auto w = GruWeights::zeros(h);
  for (auto* m : {&w.W_z, &w.W_r, &w.W_h, &w.U_z, &w.U_r, &w.U_h, &w.W_out})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = scale * rng.normal();
  for (auto* v : {&w.b_z, &w.b_r, &w.b_h, &w.b_out})
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = scale * rng.normal();
  return w;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("zero weights give a uniform answer") {
  const auto w = GruWeights::zeros(8);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<int> items(static_cast<std::size_t>(rng.between(1, 60)));
    for (auto& x : items) x = static_cast<int>(rng.between(20, 100));
    const auto [pb, pf] = gru_forward(w, items);
    CHECK(pb == 0.5);
    CHECK(pf == 0.5);
  }
}

TEST_CASE("scalar step matches a hand evaluation") {
  auto w = GruWeights::zeros(1, 20.0, 80.0);
  w.W_z(0, 0) = 0.7;  w.U_z(0, 0) = -0.3; w.b_z(0) = 0.1;
  w.W_r(0, 0) = -1.2; w.U_r(0, 0) = 0.8;  w.b_r(0) = 0.05;
  w.W_h(0, 0) = 1.5;  w.U_h(0, 0) = 0.9;  w.b_h(0) = -0.2;
  w.W_out(0, 0) = 2.0; w.W_out(1, 0) = -1.0; w.b_out << 0.3, -0.1;

  const std::vector items{60, 85};
  double h = 0.0;
  for (int item : items) {
    const double x = (item - 20.0) / 80.0;
    const double z = sig(0.7 * x - 0.3 * h + 0.1);
    const double r = sig(-1.2 * x + 0.8 * h + 0.05);
    const double ht = std::tanh(1.5 * x + 0.9 * (r * h) - 0.2);
    h = (1 - z) * h + z * ht;
  }
  const double l0 = 2.0 * h + 0.3, l1 = -1.0 * h - 0.1;
  const double p_bf = std::exp(l0) / (std::exp(l0) + std::exp(l1));

  const auto [pb, pf] = gru_forward(w, items);
  CHECK(pb == doctest::Approx(p_bf).epsilon(1e-14));
  CHECK(pb + pf == doctest::Approx(1.0).epsilon(1e-15));
  const auto one = gru_forward(w, std::vector{60});
  const double x = 0.5;
  const double h1 = sig(0.7 * x + 0.1) * std::tanh(1.5 * x - 0.2);
  CHECK(one.first == doctest::Approx(1.0 / (1.0 + std::exp(-3.0 * h1 - 0.4))).epsilon(1e-14));
}

TEST_CASE("reversal changes the output for some weights") {
  Rng rng(2);
  const std::vector items{20, 100, 35, 90, 60};
  std::vector<int> rev(items.rbegin(), items.rend());
  bool found = false;
  for (int t = 0; t < 100 && !found; ++t) {
    const auto w = random_weights(rng, 4, 1.0);
    found = std::abs(gru_forward(w, items).first - gru_forward(w, rev).first) > 1e-6;
  }
  CHECK(found);
}

TEST_CASE("hidden state stays inside (-1, 1)") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> items(40);
    for (auto& x : items) x = static_cast<int>(rng.between(20, 100));
    for (const auto& h : gru_hidden_states(random_weights(rng, 6, 1.0), items))
      CHECK(h.cwiseAbs().maxCoeff() < 1.0);
    // Large weights saturate tanh to exactly 1 in double precision.
    for (const auto& h : gru_hidden_states(random_weights(rng, 6, 10.0), items))
      CHECK(h.cwiseAbs().maxCoeff() <= 1.0);
  }
}

TEST_CASE("float and double instantiations agree") {
  Rng rng(4);
  const auto w = random_weights(rng, 5, 0.5);
  RecurrentWeights<float> wf;
  wf.hidden_dim = w.hidden_dim;
  wf.W_z = w.W_z.cast<float>(); wf.W_r = w.W_r.cast<float>(); wf.W_h = w.W_h.cast<float>();
  wf.U_z = w.U_z.cast<float>(); wf.U_r = w.U_r.cast<float>(); wf.U_h = w.U_h.cast<float>();
  wf.b_z = w.b_z.cast<float>(); wf.b_r = w.b_r.cast<float>(); wf.b_h = w.b_h.cast<float>();
  wf.W_out = w.W_out.cast<float>(); wf.b_out = w.b_out.cast<float>();
  wf.norm_offset = 20.0f;
  wf.norm_scale = 80.0f;
  const std::vector items{30, 70, 45, 99};
  CHECK(gru_forward(wf, items).first == doctest::Approx(gru_forward(w, items).first).epsilon(1e-5));
}

TEST_CASE("weights round trip through JSON") {
  Rng rng(5);
  const auto w = random_weights(rng, 3, 1.0);
  CHECK(weights_from_json(weights_to_json(w)) == w);
  const auto path = std::filesystem::temp_directory_path() / "bpadv_gru_roundtrip.json";
  save_weights(w, path);
  CHECK(load_weights(path) == w);
  std::filesystem::remove(path);
}

TEST_CASE("schema errors name the field") {
  auto j = Json::parse(weights_to_json(GruWeights::zeros(2)));
  j["U_z"] = Json::array({Json::array({0, 0, 0}), Json::array({0, 0, 0})});
  try {
    weights_from_json(j.dump());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "U_z");
  }
  j = Json::parse(weights_to_json(GruWeights::zeros(2)));
  j["hidden_dim"] = 0;
  CHECK_THROWS_AS(weights_from_json(j.dump()), SchemaError);
  j = Json::parse(weights_to_json(GruWeights::zeros(2)));
  j.erase("b_out");
  try {
    weights_from_json(j.dump());
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "b_out");
  }
}
