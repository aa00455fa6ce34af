#include <doctest.h>

#include <algorithm>

#include "bpadv/errors.hpp"
#include "bpadv/packing.hpp"
#include "bpadv/random.hpp"
#include "oracles.hpp"

using namespace bpadv;

namespace {

std::vector<int> random_items(Rng& rng, std::size_t n, int lo, int hi) {
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng.between(lo, hi));
  return v;
}

}  // namespace

TEST_CASE("first fit hand examples") {
  CHECK(pack_first_fit(std::vector{60, 70, 80, 90, 50}, 150).bin_fills ==
        std::vector{130, 130, 90});
  CHECK(pack_first_fit(std::vector{150}, 150).bin_fills == std::vector{150});
  CHECK(pack_first_fit(std::vector{100, 60, 50, 90}, 150).bin_fills ==
        std::vector{150, 150});
}

TEST_CASE("best fit hand examples") {
  CHECK(pack_best_fit(std::vector{60, 70, 80, 90, 50}, 150).bin_fills ==
        std::vector{130, 80, 140});
  CHECK(pack_best_fit(std::vector{150, 150}, 150).bin_fills ==
        std::vector{150, 150});
}

TEST_CASE("heuristics agree when every item exceeds half the capacity") {
  const std::vector items{76, 90, 100, 120, 80};
  CHECK(pack_first_fit(items, 150) == pack_best_fit(items, 150));
}

TEST_CASE("falkenauer values") {
  CHECK(falkenauer_objective(std::vector{150, 150}, 150) == 1.0);
  CHECK(falkenauer_score(std::vector{150, 150}, 150).is_one());
  const double ff = (2 * (13.0 / 15) * (13.0 / 15) + (9.0 / 15) * (9.0 / 15)) / 3;
  const double bf = ((13.0 / 15) * (13.0 / 15) + (8.0 / 15) * (8.0 / 15) +
                     (14.0 / 15) * (14.0 / 15)) / 3;
  CHECK(falkenauer_objective(std::vector{130, 130, 90}, 150) == doctest::Approx(ff).epsilon(1e-15));
  CHECK(falkenauer_objective(std::vector{130, 80, 140}, 150) == doctest::Approx(bf).epsilon(1e-15));
  CHECK(ff == doctest::Approx(0.620740740740).epsilon(1e-10));
  CHECK(bf == doctest::Approx(0.635555555555).epsilon(1e-10));
}

TEST_CASE("falkenauer rejects bad input") {
  CHECK_THROWS_AS(falkenauer_score(std::vector<int>{}, 150), DomainError);
  CHECK_THROWS_AS(falkenauer_score(std::vector{151}, 150), DomainError);
  CHECK_THROWS_AS(falkenauer_score(std::vector{0}, 150), DomainError);
  CHECK_THROWS_AS(falkenauer_score(std::vector{10}, 150, 0), DomainError);
}

TEST_CASE("packers reject bad input") {
  CHECK_THROWS_AS(pack_first_fit(std::vector{151}, 150), CapacityError);
  CHECK_THROWS_AS(pack_best_fit(std::vector{10, 200}, 150), CapacityError);
  CHECK_THROWS_AS(pack_first_fit(std::vector<int>{}, 150), DomainError);
  CHECK_THROWS_AS(pack_best_fit(std::vector{0}, 150), DomainError);
}

TEST_CASE("portfolio winner") {
  const Portfolio p;
  const auto out = evaluate_portfolio(std::vector{60, 70, 80, 90, 50}, p);
  REQUIRE(out.winner);
  CHECK(*out.winner == Solver::BF);
  CHECK(!evaluate_portfolio(std::vector{150, 150}, p).winner);
  CHECK(portfolio_winner(std::vector{60, 70, 80, 90, 50}, p) == out.winner);
}

TEST_CASE("reversing the item order can change the winner") {
  Rng rng(11);
  bool found = false;
  for (int trial = 0; trial < 20000 && !found; ++trial) {
    auto items = random_items(rng, 6, 20, 100);
    auto rev = items;
    std::reverse(rev.begin(), rev.end());
    const auto a = oracle::winner(items, 150), b = oracle::winner(rev, 150);
    if (a && b && *a != *b) {
      found = true;
      const Portfolio p;
      CHECK(portfolio_winner(items, p) != portfolio_winner(rev, p));
    }
  }
  CHECK(found);
}

TEST_CASE("packers match the replay oracle and conserve mass") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(1, 50));
    const int cap = static_cast<int>(rng.between(100, 200));
    const auto items = random_items(rng, n, 1, cap);
    const auto ff = pack_first_fit(items, cap);
    const auto bf = pack_best_fit(items, cap);
    CHECK(oracle::replay_ok(items, cap, oracle::Rule::FirstFit, ff.bin_fills));
    CHECK(oracle::replay_ok(items, cap, oracle::Rule::BestFit, bf.bin_fills));
    const auto exact = oracle::falkenauer(ff.bin_fills, cap);
    CHECK(oracle::compare(exact, {ff.score.numerator, ff.score.denominator}) == 0);
  }
}

TEST_CASE("bin counts never beat the exhaustive optimum") {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto items = random_items(rng, static_cast<std::size_t>(rng.between(1, 8)), 20, 100);
    const int opt = oracle::optimal_bins(items, 150);
    CHECK(pack_first_fit(items, 150).n_bins() >= static_cast<std::size_t>(opt));
    CHECK(pack_best_fit(items, 150).n_bins() >= static_cast<std::size_t>(opt));
  }
}

TEST_CASE("prefix consistency") {
  // Online packing: the prefix of a packing is the packing of the prefix
  // up to the bins the remaining items touch; total fill of a prefix agrees.
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto items = random_items(rng, 30, 20, 100);
    const std::vector<int> prefix(items.begin(), items.begin() + 15);
    const auto whole = pack_first_fit(items, 150).bin_fills;
    const auto part = pack_first_fit(prefix, 150).bin_fills;
    REQUIRE(part.size() <= whole.size());
    for (std::size_t b = 0; b < part.size(); ++b) CHECK(part[b] <= whole[b]);
  }
}

TEST_CASE("score ordering is exact") {
  const FalkenauerScore a{1, 3}, b{2, 6}, c{1, 2};
  CHECK(a == b);
  CHECK(a < c);
  CHECK(solver_from_string(to_string(Solver::FF)) == Solver::FF);
  CHECK(other(Solver::BF) == Solver::FF);
}
