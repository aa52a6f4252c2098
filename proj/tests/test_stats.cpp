#include <doctest.h>

#include <cmath>
#include <vector>

#include "sle/philox.hpp"
#include "sle/stats.hpp"

using namespace sle;
using namespace sle::stats;

TEST_CASE("identical samples give a zero KS statistic") {
  std::vector<double> a;
  for (int i = 0; i < 500; ++i) a.push_back(rng::gaussian(3, 0, i));
  const auto r = ks_two_sample(a, a);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("KS statistic against a brute-force oracle") {
  std::vector<double> a, b;
  for (int i = 0; i < 300; ++i) a.push_back(rng::gaussian(5, 0, i));
  for (int i = 0; i < 200; ++i) b.push_back(rng::gaussian(5, 1, i) + 0.3);
  double d = 0.0;
  auto ecdf = [](const std::vector<double>& v, double x) {
    double c = 0;
    for (double u : v) c += u <= x;
    return c / v.size();
  };
  for (double x : a) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  for (double x : b) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  const auto r = ks_two_sample(a, b);
  CHECK(r.statistic == doctest::Approx(d).epsilon(1e-14));
  CHECK(r.p_value < 0.05);
}

TEST_CASE("KS p-values are roughly uniform under the null") {
  int rejections = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a, b;
    for (int i = 0; i < 200; ++i) {
      a.push_back(rng::gaussian(100 + rep, 0, i));
      b.push_back(rng::gaussian(100 + rep, 1, i));
    }
    rejections += ks_two_sample(a, b).p_value < 0.05;
  }
  // Binomial(200, 0.05): mean 10, sd ~3.1.
  CHECK(rejections <= 22);
}

TEST_CASE("Kolmogorov survival function") {
  CHECK(kolmogorov_q(0.0) == 1.0);
  // Known quantiles of the Kolmogorov distribution.
  CHECK(kolmogorov_q(1.3581) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(kolmogorov_q(1.6276) == doctest::Approx(0.01).epsilon(2e-3));
  // Both branches agree at the switch point.
  CHECK(kolmogorov_q(1.18 - 1e-9) == doctest::Approx(kolmogorov_q(1.18 + 1e-9)).epsilon(1e-6));
}

TEST_CASE("Clopper-Pearson edges and coverage") {
  const auto none = clopper_pearson(0, 100);
  CHECK(none.low == 0.0);
  CHECK(none.high == doctest::Approx(1.0 - std::pow(0.005, 0.01)).epsilon(1e-9));
  const auto all = clopper_pearson(100, 100);
  CHECK(all.high == 1.0);
  CHECK(all.low == doctest::Approx(std::pow(0.005, 0.01)).epsilon(1e-9));
  std::size_t k = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) k += rng::uniform(9, 0, i) < 0.1;
  const auto ci = clopper_pearson(k, n);
  CHECK(ci.low < 0.1);
  CHECK(ci.high > 0.1);
}

TEST_CASE("summary statistics and least squares") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(standard_error(v) == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const auto f = least_squares(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
}
