#include "bpadv/packing.hpp"

#include <limits>
#include <string>

#include "bpadv/errors.hpp"

namespace bpadv {

std::string_view to_string(Solver s) { return s == Solver::BF ? "BF" : "FF"; }

Solver solver_from_string(std::string_view s) {
  if (s == "BF") return Solver::BF;
  if (s == "FF") return Solver::FF;
  throw DomainError("unknown solver '" + std::string(s) + "'");
}

namespace {

std::int64_t checked_pow(std::int64_t base, int k) {
  std::int64_t r = 1;
  for (int i = 0; i < k; ++i) {
    if (r > std::numeric_limits<std::int64_t>::max() / base)
      throw DomainError("falkenauer exponent overflows 64-bit arithmetic");
    r *= base;
  }
  return r;
}

void check_items(std::span<const int> items, int capacity) {
  if (capacity <= 0) throw DomainError("capacity must be positive");
  if (items.empty()) throw DomainError("cannot pack an empty item list");
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (items[j] <= 0)
      throw DomainError("item " + std::to_string(j) + " has size " +
                        std::to_string(items[j]));
    if (items[j] > capacity)
      throw CapacityError("item " + std::to_string(j) + " of size " +
                          std::to_string(items[j]) + " exceeds capacity " +
                          std::to_string(capacity));
  }
}

PackingResult finish(std::vector<int> fills, int capacity, int k) {
  PackingResult r;
  r.score = falkenauer_score(fills, capacity, k);
  r.falkenauer = r.score.value();
  r.bin_fills = std::move(fills);
  return r;
}

// Residual-based kernels shared by the full and winner-only paths.
void first_fit_fills(std::span<const int> items, int capacity,
                     std::vector<int>& fills) {
  fills.clear();
  for (int item : items) {
    bool placed = false;
    for (int& f : fills) {
      if (capacity - f >= item) {
        f += item;
        placed = true;
        break;
      }
    }
    if (!placed) fills.push_back(item);
  }
}

void best_fit_fills(std::span<const int> items, int capacity,
                    std::vector<int>& fills) {
  fills.clear();
  for (int item : items) {
    int best = -1;
    int best_residual = capacity + 1;
    for (std::size_t b = 0; b < fills.size(); ++b) {
      const int residual = capacity - fills[b] - item;
      if (residual >= 0 && residual < best_residual) {
        best_residual = residual;
        best = static_cast<int>(b);
        if (residual == 0) break;
      }
    }
    if (best < 0)
      fills.push_back(item);
    else
      fills[static_cast<std::size_t>(best)] += item;
  }
}

}  // namespace

FalkenauerScore falkenauer_score(std::span<const int> bin_fills, int capacity,
                                 int k) {
  if (bin_fills.empty()) throw DomainError("falkenauer: empty bin list");
  if (capacity <= 0) throw DomainError("falkenauer: capacity must be positive");
  if (k < 1) throw DomainError("falkenauer: exponent must be >= 1");
  const std::int64_t cap_k = checked_pow(capacity, k);
  const auto n = static_cast<std::int64_t>(bin_fills.size());
  if (cap_k > std::numeric_limits<std::int64_t>::max() / n)
    throw DomainError("falkenauer: denominator overflows");
  FalkenauerScore s;
  s.denominator = cap_k * n;
  for (int f : bin_fills) {
    if (f <= 0 || f > capacity)
      throw DomainError("falkenauer: fill " + std::to_string(f) +
                        " outside (0, capacity]");
    s.numerator += checked_pow(f, k);
  }
  return s;
}

double falkenauer_objective(std::span<const int> bin_fills, int capacity,
                            int k) {
  return falkenauer_score(bin_fills, capacity, k).value();
}

PackingResult pack_first_fit(std::span<const int> items, int capacity, int k) {
  check_items(items, capacity);
  std::vector<int> fills;
  first_fit_fills(items, capacity, fills);
  return finish(std::move(fills), capacity, k);
}

PackingResult pack_best_fit(std::span<const int> items, int capacity, int k) {
  check_items(items, capacity);
  std::vector<int> fills;
  best_fit_fills(items, capacity, fills);
  return finish(std::move(fills), capacity, k);
}

PortfolioOutcome evaluate_portfolio(std::span<const int> items,
                                    const Portfolio& portfolio) {
  PortfolioOutcome out;
  out.bf = pack_best_fit(items, portfolio.capacity,
                         portfolio.falkenauer_exponent);
  out.ff = pack_first_fit(items, portfolio.capacity,
                          portfolio.falkenauer_exponent);
  const auto cmp = out.bf.score <=> out.ff.score;
  if (cmp > 0)
    out.winner = Solver::BF;
  else if (cmp < 0)
    out.winner = Solver::FF;
  return out;
}

std::optional<Solver> portfolio_winner(std::span<const int> items,
                                       const Portfolio& portfolio) {
  check_items(items, portfolio.capacity);
  thread_local std::vector<int> bf, ff;
  best_fit_fills(items, portfolio.capacity, bf);
  first_fit_fills(items, portfolio.capacity, ff);
  const auto sb = falkenauer_score(bf, portfolio.capacity,
                                   portfolio.falkenauer_exponent);
  const auto sf = falkenauer_score(ff, portfolio.capacity,
                                   portfolio.falkenauer_exponent);
  const auto cmp = sb <=> sf;
  if (cmp > 0) return Solver::BF;
  if (cmp < 0) return Solver::FF;
  return std::nullopt;
}

}  // namespace bpadv
