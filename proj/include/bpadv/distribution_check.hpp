#pragma once

#include <span>

namespace bpadv {

struct KsResult {
  double statistic = 0.0;  // sup |F_a - F_b|
  double p_value = 1.0;
  bool reject_at_0_05 = false;
};

/// Kolmogorov distribution tail Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * D, ne = n m / (n + m).
/// Throws EmptyInputError if either sample is empty.
KsResult ks_two_sample(std::span<const int> a, std::span<const int> b);

}  // namespace bpadv
