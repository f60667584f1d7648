#pragma once

#include <cstddef>
#include <vector>

namespace intman {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
};

Summary summarize(std::vector<double> v);

/// Linear interpolation between order statistics, q in [0, 1].
double quantile(std::vector<double> v, double q);

struct PairedTest {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double t = 0.0;
  double p_greater = 1.0;  ///< one-sided p for mean(a - b) > 0
  double p_two_sided = 1.0;
};

/// Paired t-test on a[i] - b[i].
PairedTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0;  ///< confidence interval for the slope
  double ci_high = 0.0;
};

/// Ordinary least squares y = a + b x with a two-sided t interval on b.
Regression ols(const std::vector<double>& x, const std::vector<double>& y, double level = 0.95);

}  // namespace intman
