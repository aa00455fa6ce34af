#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "bpadv/analysis.hpp"
#include "bpadv/errors.hpp"
#include "bpadv/random.hpp"
#include "oracles.hpp"

using namespace bpadv;

namespace {

// Two-sided Student t tail by Simpson integration of the density.
double t_tail_oracle(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) /
                   std::sqrt(df * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 200000;
  const double h = std::abs(t) / n;
  double s = pdf(0) + pdf(std::abs(t));
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

InstanceAnalysis attacked(std::string id, Solver w, double max_fitness,
                          std::optional<OutcomeType> outcome = std::nullopt,
                          std::optional<std::uint64_t> hit = std::nullopt) {
  InstanceAnalysis a;
  a.id = std::move(id);
  a.winner = w;
  a.attacked = true;
  a.max_fitness = max_fitness;
  a.outcome = outcome;
  a.min_first_hit = hit;
  a.category = max_fitness > 0 ? InstanceCategory::Perturbable : InstanceCategory::Robust;
  return a;
}

InstanceAnalysis fragile(std::string id, Solver w) {
  InstanceAnalysis a;
  a.id = std::move(id);
  a.winner = w;
  a.fragile = true;
  a.category = InstanceCategory::Fragile;
  return a;
}

}  // namespace

TEST_CASE("mask statistics by direct count") {
  const auto s = mask_stats(Mask::from_ints(std::vector{1, 1, -1, 0, 1}));
  CHECK(s.sum_difference == 2);
  CHECK(s.n_changes == 4);
  CHECK(s.longest_sequence == 3);
  CHECK(s.longest_positive_sequence == 2);
  CHECK(mask_stats(Mask(7)) == MaskStats{});

  const std::vector interior{50, 50, 50, 50, 50};
  const auto c = mask_stats(interior, Mask::from_ints(std::vector{1, 1, -1, 0, 1}), {});
  CHECK(c.sum_difference == 2);
  CHECK(c.effective_changes == 4);
}

TEST_CASE("clipped entries count as intent but not as effect") {
  const std::vector at_min{20};
  const auto s = mask_stats(at_min, Mask::from_ints(std::vector{-1}), {});
  CHECK(s.sum_difference == 0);
  CHECK(s.n_changes == 1);
  CHECK(s.effective_changes == 0);
}

TEST_CASE("outcome types") {
  using M = MisclassType;
  CHECK(classify_outcome(std::vector{M::SameWinnerModelFlipped, M::SameWinnerModelFlipped}) == OutcomeType::T1);
  CHECK(classify_outcome(std::vector{M::WinnerFlippedModelStatic}) == OutcomeType::T2);
  CHECK(classify_outcome(std::vector{M::WinnerFlippedModelStatic, M::SameWinnerModelFlipped}) == OutcomeType::T3);
  CHECK_THROWS_AS(classify_outcome(std::vector<M>{}), EmptyInputError);
}

TEST_CASE("spearman hand values") {
  CHECK(spearman(std::vector{1.0, 2.0, 3.0}, std::vector{3.0, 2.0, 1.0}).rho ==
        doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(spearman(std::vector{1.0, 2.0, 3.0, 4.0}, std::vector{1.0, 3.0, 2.0, 4.0}).rho ==
        doctest::Approx(0.8).epsilon(1e-9));
  CHECK_THROWS_AS(spearman(std::vector{2.0, 2.0, 2.0}, std::vector{1.0, 2.0, 3.0}), DomainError);
  CHECK_THROWS_AS(spearman(std::vector{1.0, 2.0}, std::vector{1.0, 2.0, 3.0}), DomainError);
}

TEST_CASE("spearman agrees with rank-then-pearson on random samples with ties") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const auto n = static_cast<std::size_t>(rng.between(3, 40));
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.between(0, 6));
    for (auto& v : y) v = static_cast<double>(rng.between(0, 6));
    double expected;
    try {
      expected = oracle::spearman(x, y);
    } catch (const std::domain_error&) {
      CHECK_THROWS_AS(spearman(x, y), DomainError);
      continue;
    }
    CHECK(spearman(x, y).rho == doctest::Approx(expected).epsilon(1e-12));
    CHECK(average_ranks(x) == oracle::ranks(x));
  }
}

TEST_CASE("t distribution tail matches numeric integration") {
  for (double df : {1.0, 2.0, 5.0, 18.0, 100.0})
    for (double t : {0.1, 0.7, 1.5, 2.2, 4.0})
      CHECK(student_t_two_sided(t, df) == doctest::Approx(t_tail_oracle(t, df)).epsilon(1e-8));
  const auto p = spearman(std::vector{1.0, 2.0, 3.0, 4.0, 5.0}, std::vector{2.0, 1.0, 4.0, 3.0, 5.0});
  const double t = p.rho * std::sqrt(3.0 / (1 - p.rho * p.rho));
  CHECK(p.p_value == doctest::Approx(t_tail_oracle(t, 3)).epsilon(1e-8));
}

TEST_CASE("quantiles interpolate linearly") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> v(static_cast<std::size_t>(rng.between(1, 30)));
    for (auto& x : v) x = rng.uniform();
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0})
      CHECK(quantile(v, q) == doctest::Approx(oracle::quantile(v, q)).epsilon(1e-15));
  }
  CHECK(quantile(std::vector{1.0, 1.0, 1.0}, 0.25) == 1.0);
  CHECK(median(std::vector{1.0, 2.0, 3.0, 4.0}) == 2.5);
  CHECK_THROWS_AS(quantile({}, 0.5), EmptyInputError);
}

TEST_CASE("campaign summary") {
  const std::vector<InstanceAnalysis> v{
      attacked("a", Solver::BF, 0.9, OutcomeType::T1, 120),
      attacked("b", Solver::FF, -0.5),
      attacked("c", Solver::BF, -0.2),
      fragile("d", Solver::FF)};
  const auto s = campaign_summary(v);
  CHECK(s.n_attacked == 3);
  CHECK(s.n_fragile == 1);
  CHECK(s.success_rate == doctest::Approx(100.0 / 3));
  CHECK(s.queries == 120.0);
  CHECK(s.t1 == 100.0);
  CHECK(s.fitness_median == -0.2);
  CHECK(s.fitness_q1 == doctest::Approx(-0.35));
  CHECK(s.fitness_q3 == doctest::Approx(0.35));

  const std::vector<InstanceAnalysis> ones{attacked("a", Solver::BF, 1.0, OutcomeType::T2, 3),
                                           attacked("b", Solver::BF, 1.0, OutcomeType::T2, 50)};
  const auto o = campaign_summary(ones);
  CHECK(o.fitness_median == 1.0);
  CHECK(o.fitness_q1 == 1.0);
  CHECK(o.fitness_q3 == 1.0);
  CHECK(*o.queries <= 50);

  CHECK_THROWS_AS(campaign_summary(std::vector{fragile("x", Solver::BF)}), EmptyInputError);
}

TEST_CASE("categories partition the instances") {
  const std::vector<InstanceAnalysis> v{
      fragile("a", Solver::FF), fragile("b", Solver::BF),
      attacked("c", Solver::BF, 0.4, OutcomeType::T2, 5), attacked("d", Solver::BF, -1.0)};
  const auto t = categorize(v);
  REQUIRE(t.rows.size() == 2);
  double total = 0;
  for (const auto& r : t.rows) total += r.robust + r.perturbable + r.fragile;
  CHECK(total == doctest::Approx(100.0));
  CHECK(t.rows[0].winner == Solver::BF);
  CHECK(t.rows[0].robust == 25.0);
  CHECK(t.rows[1].fragile == 25.0);
}

TEST_CASE("probe hits take precedence over EA results") {
  LabeledInstance inst{{"z", {50, 60, 70}}, 0.5, 0.4, Solver::BF};
  InstanceOutcome o{inst, {}, {}};
  o.probe.instance_id = "z";
  o.probe.fragile = true;
  InstanceArchive arch(3);
  arch.insert(Mask::from_ints(std::vector{1, 0, 0}), 0.3, MisclassType::SameWinnerModelFlipped);
  CHECK(analyze_instance(o, arch, {}).category == InstanceCategory::Fragile);

  o.probe.fragile = false;
  for (std::size_t r = 0; r < 10; ++r)
    o.runs.push_back({"z", r, Mask(3), -0.5, std::vector<double>(3, -0.5), std::nullopt, 150, 0});
  const auto a = analyze_instance(o, InstanceArchive(3), {});
  CHECK(a.category == InstanceCategory::Robust);
  CHECK(!a.successful());
}

TEST_CASE("csv shapes") {
  LabeledInstance inst{{"q", std::vector<int>(120, 50)}, 0.5, 0.4, Solver::FF};
  InstanceOutcome o{inst, {}, {}};
  o.probe.instance_id = "q";
  for (std::size_t r = 0; r < 10; ++r)
    o.runs.push_back({"q", r, Mask(120), 0.2, std::vector<double>(501, 0.2), 7, 25050, 5});
  InstanceArchive arch(120);
  Rng rng(3);
  while (arch.size() < 5) arch.insert(sample_initial_mask(120, 0.3, rng), 0.2, MisclassType::WinnerFlippedModelStatic);

  auto lines = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (std::size_t e; (e = s.find("\r\n", pos)) != std::string::npos; pos = e + 2)
      out.push_back(s.substr(pos, e - pos));
    return out;
  };
  auto cells = [](const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  };

  std::ostringstream traj;
  PlotExporter(traj, PlotKind::Trajectories, {}).add(o, arch);
  CHECK(lines(traj.str()).size() == 1 + 10 * 501);

  std::ostringstream heat;
  PlotExporter(heat, PlotKind::MaskHeatmap, {}).add(o, arch);
  const auto h = lines(heat.str());
  REQUIRE(h.size() == 6);
  for (const auto& l : h) CHECK(cells(l) == 122);

  std::ostringstream proj;
  PlotExporter(proj, PlotKind::ProjectionMatrix, {}).add(o, arch);
  const auto p = lines(proj.str());
  REQUIRE(p.size() == 2);
  CHECK(cells(p[0]) == 122);
  CHECK(p[1].ends_with(",FF,PERTURBABLE"));

  std::ostringstream box;
  PlotExporter(box, PlotKind::StatsBox, {}).add(o, arch);
  CHECK(lines(box.str()).size() == 6);

  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(plot_kind_from_string("stats_box") == PlotKind::StatsBox);
}
