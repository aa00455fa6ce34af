#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace bpadv {

enum class Solver { BF, FF };

std::string_view to_string(Solver s);
Solver solver_from_string(std::string_view s);
inline Solver other(Solver s) { return s == Solver::BF ? Solver::FF : Solver::BF; }

/// Falkenauer score as an exact fraction sum(fill^k) / (capacity^k * n_bins).
struct FalkenauerScore {
  std::int64_t numerator = 0;
  std::int64_t denominator = 1;

  double value() const {
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
  bool is_one() const { return numerator == denominator; }

  friend std::strong_ordering operator<=>(const FalkenauerScore& a,
                                          const FalkenauerScore& b) {
    const auto lhs = static_cast<__int128>(a.numerator) * b.denominator;
    const auto rhs = static_cast<__int128>(b.numerator) * a.denominator;
    return lhs <=> rhs;
  }
  friend bool operator==(const FalkenauerScore& a, const FalkenauerScore& b) {
    return (a <=> b) == 0;
  }
};

struct PackingResult {
  std::vector<int> bin_fills;  // creation order
  FalkenauerScore score;
  double falkenauer = 0.0;

  std::size_t n_bins() const { return bin_fills.size(); }
  bool operator==(const PackingResult&) const = default;
};

/// Exact Falkenauer score; throws DomainError on an empty list, a fill
/// outside (0, capacity] or a k that would overflow 64-bit arithmetic.
FalkenauerScore falkenauer_score(std::span<const int> bin_fills, int capacity,
                                 int k = 2);

/// (sum_i (fill_i / capacity)^k) / n_bins.
double falkenauer_objective(std::span<const int> bin_fills, int capacity,
                            int k = 2);

/// Online first-fit: each item into the lowest-index bin that can hold it.
PackingResult pack_first_fit(std::span<const int> items, int capacity,
                             int k = 2);

/// Online best-fit: each item into the feasible bin with the smallest
/// post-placement residual, lowest index on ties.
PackingResult pack_best_fit(std::span<const int> items, int capacity,
                            int k = 2);

/// The two-solver portfolio. `falkenauer_exponent` is the k of the metric.
struct Portfolio {
  int capacity = 150;
  int falkenauer_exponent = 2;
};

struct PortfolioOutcome {
  PackingResult bf;
  PackingResult ff;
  std::optional<Solver> winner;  // empty on an exact tie

  double o_bf() const { return bf.falkenauer; }
  double o_ff() const { return ff.falkenauer; }
};

PortfolioOutcome evaluate_portfolio(std::span<const int> items,
                                    const Portfolio& portfolio);

/// Winner only, without keeping the bin lists. Hot path of the attack.
std::optional<Solver> portfolio_winner(std::span<const int> items,
                                       const Portfolio& portfolio);

}  // namespace bpadv
