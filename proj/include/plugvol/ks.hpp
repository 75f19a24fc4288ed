// One-sample Kolmogorov-Smirnov test against the standard normal.
#pragma once

#include <span>

namespace plugvol {

struct KsResult {
  double statistic = 0.0;  // sup |F_n - Phi|
  double p_value = 1.0;
};

// Two-sided test. Needs at least 100 finite values.
KsResult ks_normal(std::span<const double> stats);

// P(D_n < d) for the two-sided statistic of a continuous null.
double ks_cdf(std::size_t n, double d);

}  // namespace plugvol
