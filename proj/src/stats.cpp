#include "sle/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <cmath>
#include <numbers>

#include "sle/errors.hpp"

namespace sle::stats {

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Small-argument form converges much faster than the alternating series.
    const double w = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 9; k += 2) s += std::exp(-w * k * k);
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::invalid_argument, "KS test needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n1 = double(x.size()), n2 = double(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(i / n1 - j / n2));
  }
  KsResult r;
  r.statistic = d;
  r.n1 = x.size();
  r.n2 = y.size();
  const double en = std::sqrt(n1 * n2 / (n1 + n2));
  r.p_value = d == 0.0 ? 1.0 : kolmogorov_q((en + 0.12 + 0.11 / en) * d);
  return r;
}

Interval clopper_pearson(std::size_t k, std::size_t n, double confidence) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "empty sample");
  if (k > n) throw Error(ErrorKind::invalid_argument, "more successes than trials");
  const double alpha = 1.0 - confidence;
  Interval ci;
  const double kk = double(k), nn = double(n);
  if (k > 0) ci.low = boost::math::quantile(boost::math::beta_distribution<>(kk, nn - kk + 1), alpha / 2);
  if (k < n) ci.high = boost::math::quantile(boost::math::beta_distribution<>(kk + 1, nn - kk), 1 - alpha / 2);
  return ci;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorKind::invalid_argument, "mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) throw Error(ErrorKind::invalid_argument, "standard error needs two values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1) / double(v.size()));
}

double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorKind::invalid_argument, "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::invalid_argument, "line fit needs two matched points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw Error(ErrorKind::invalid_argument, "line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace sle::stats
