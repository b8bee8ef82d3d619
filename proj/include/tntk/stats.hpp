#pragma once

#include <cstddef>
#include <span>

namespace tntk::stats {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  // Two-sided p-value of the t-test for slope == 0 (n - 2 degrees of freedom).
  double p_value = 1.0;
  std::size_t n = 0;
};

// Ordinary least squares y = intercept + slope * x. Needs n >= 2.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Fit in log-log space; all values must be positive.
LinearFit fit_loglog(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);
// Sample standard deviation; zero for a single value.
double stddev(std::span<const double> values);

}  // namespace tntk::stats
