#pragma once

// Reference implementations used only by the tests. They are written
// without touching the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace oracle {

enum class Rule { FirstFit, BestFit };

// Naive online packer: scan every open bin for each item.
inline std::vector<int> pack(const std::vector<int>& items, int cap, Rule rule) {
  std::vector<int> bins;
  for (int x : items) {
    int chosen = -1;
    for (int b = 0; b < static_cast<int>(bins.size()); ++b) {
      if (bins[b] + x > cap) continue;
      if (rule == Rule::FirstFit) {
        chosen = b;
        break;
      }
      if (chosen < 0 || cap - bins[b] - x < cap - bins[chosen] - x) chosen = b;
    }
    if (chosen < 0) {
      bins.push_back(x);
    } else {
      bins[chosen] += x;
    }
  }
  return bins;
}

// Replays a claimed assignment and checks each step obeys the rule.
inline bool replay_ok(const std::vector<int>& items, int cap, Rule rule,
                      const std::vector<int>& claimed_fills) {
  const auto ref = pack(items, cap, rule);
  if (ref != claimed_fills) return false;
  long total = 0;
  for (int f : claimed_fills) {
    if (f <= 0 || f > cap) return false;
    total += f;
  }
  return total == std::accumulate(items.begin(), items.end(), 0L);
}

// Minimum number of bins over every set partition of the items.
inline int optimal_bins(const std::vector<int>& items, int cap) {
  const int n = static_cast<int>(items.size());
  int best = n;
  std::vector<int> loads;
  auto rec = [&](auto&& self, int i) -> void {
    if (static_cast<int>(loads.size()) >= best) return;
    if (i == n) {
      best = static_cast<int>(loads.size());
      return;
    }
    for (std::size_t b = 0; b < loads.size(); ++b) {
      if (loads[b] + items[i] <= cap) {
        loads[b] += items[i];
        self(self, i + 1);
        loads[b] -= items[i];
      }
    }
    loads.push_back(items[i]);
    self(self, i + 1);
    loads.pop_back();
  };
  rec(rec, 0);
  return best;
}

// Falkenauer score as (sum f^2, cap^2 * bins), compared by cross-multiplying.
struct Fraction {
  __int128 num;
  __int128 den;
};

inline Fraction falkenauer(const std::vector<int>& fills, int cap) {
  __int128 s = 0;
  for (int f : fills) s += static_cast<__int128>(f) * f;
  return {s, static_cast<__int128>(cap) * cap * static_cast<__int128>(fills.size())};
}

inline int compare(Fraction a, Fraction b) {
  const __int128 l = a.num * b.den, r = b.num * a.den;
  return l < r ? -1 : (l > r ? 1 : 0);
}

// 0 = BF, 1 = FF, nullopt on a tie.
inline std::optional<int> winner(const std::vector<int>& items, int cap) {
  const int c = compare(falkenauer(pack(items, cap, Rule::BestFit), cap),
                        falkenauer(pack(items, cap, Rule::FirstFit), cap));
  if (c == 0) return std::nullopt;
  return c > 0 ? 0 : 1;
}

// Average ranks by counting, O(n^2).
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw std::domain_error("constant sample");
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

// Sorted-copy quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// sup |F_a - F_b| over every observed value.
inline double ks_statistic(const std::vector<int>& a, const std::vector<int>& b) {
  double d = 0;
  std::vector<int> all(a);
  all.insert(all.end(), b.begin(), b.end());
  for (int t : all) {
    const double fa = static_cast<double>(std::count_if(a.begin(), a.end(), [&](int x) { return x <= t; })) / a.size();
    const double fb = static_cast<double>(std::count_if(b.begin(), b.end(), [&](int x) { return x <= t; })) / b.size();
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace oracle
