#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sle::stats {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// Q_KS((sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) D), ne = n1 n2 / (n1 + n2).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Survival function of the Kolmogorov distribution.
double kolmogorov_q(double lambda);

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Exact (Clopper-Pearson) two-sided interval for k successes out of n.
Interval clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.99);

double mean(std::span<const double> v);
/// Standard error of the mean (sample standard deviation / sqrt(n)).
double standard_error(std::span<const double> v);
double median(std::vector<double> v);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

LineFit least_squares(std::span<const double> x, std::span<const double> y);

}  // namespace sle::stats
