#include "bpadv/distribution_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bpadv/errors.hpp"

namespace bpadv {

double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0, sign = 1.0, prev = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) <= 1e-10 * std::fabs(sum) || std::fabs(term) <= 1e-16 * prev)
      return std::clamp(2.0 * sum, 0.0, 1.0);
    sign = -sign;
    prev = std::fabs(term);
  }
  return 1.0;  // series did not converge: lambda too small to reject
}

KsResult ks_two_sample(std::span<const int> a, std::span<const int> b) {
  if (a.empty() || b.empty()) throw EmptyInputError("ks_two_sample: empty sample");
  std::vector<int> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  // Step both empirical CDFs past each distinct value before comparing.
  while (i < x.size() && j < y.size()) {
    const int v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsResult r;
  r.statistic = d;
  const double ne = std::sqrt(n * m / (n + m));
  r.p_value = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
  r.reject_at_0_05 = r.p_value < 0.05;
  return r;
}

}  // namespace bpadv
