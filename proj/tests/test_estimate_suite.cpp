#include <doctest.h>

#include <cmath>
#include <vector>

#include "sle/driver_gen.hpp"
#include "sle/errors.hpp"
#include "sle/estimate_suite.hpp"
#include "sle/philox.hpp"
#include "sle/radial_diffusion.hpp"

using namespace sle;
using namespace sle::estimates;
using driver::KappaGrid;

TEST_CASE("tail bound trivial cases") {
  CHECK(tail_bound({4.0, 0.0, 0.0, {0.3, 0.5}, 2.0, 7.0}) == 1.0);
  CHECK(tail_bound({4.0, 0.75, 1.875, {0, 1}, 0.0, 3.0}) == doctest::Approx(std::pow(3.0, -1.875)));
  CHECK(tail_bound({4.0, 0.75, 1.875, {0, 1}, 1.0, 3.0}) ==
        doctest::Approx(std::exp(0.75 - 0.9375) * std::pow(3.0, -1.875)).epsilon(1e-14));
  // An off-axis start pays (|z0| / y0)^{2r}.
  CHECK(tail_bound({4.0, 0.5, 0.0, {1, 1}, 0.0, 2.0}) == doctest::Approx(std::sqrt(2.0)));
  CHECK_THROWS_AS(tail_bound({4.0, 2.5, 0.0, {0, 1}, 0.0, 2.0}), Error);
}

TEST_CASE("tail bound dominates the Monte Carlo tail at kappa 4") {
  const double kappa = 4.0, r = 0.75, b = 1.875;
  const std::vector<double> grid{0.0, 1.0};
  const auto paths = radial::radial_batch(kappa, {0, 1}, grid, 2000, 17, 0);
  std::vector<double> deriv;
  for (const auto& p : paths) deriv.push_back(std::exp(p.log_deriv.back()));
  for (double lambda : {1.2, 1.5, 2.0, 3.0}) {
    const auto e = empirical_tail(deriv, lambda);
    CHECK(e.ci_high <= tail_bound({kappa, r, b, {0, 1}, 1.0, lambda}));
  }
}

TEST_CASE("delta factor branches") {
  // r = 2b / kappa: choose b = kappa r / 2.
  CHECK(delta_factor(std::exp(-2.0), std::exp(1.0), 0.5, 1.0, 4.0) == doctest::Approx(1.0));
  // r < 2b / kappa with lambda = 1 is only legal when extended.
  CHECK_THROWS_AS(delta_factor(0.5, 1.0, 0.5, 2.0, 4.0), Error);
  CHECK(delta_factor(0.5, 1.0, 0.5, 2.0, 4.0, true) == 1.0);
  CHECK(delta_factor(0.1, 5.0, 0.5, 2.0, 4.0) == doctest::Approx(std::pow(5.0, -1.0)));
  // r > 2b / kappa
  CHECK(delta_factor(0.1, 5.0, 1.0, 1.0, 4.0) == doctest::Approx(std::pow(0.1, -1.0)));
  CHECK_THROWS_AS(delta_factor(0.1, 20.0, 1.0, 1.0, 4.0), Error);
  CHECK_THROWS_AS(delta_factor(1.5, 3.0, 1.0, 1.0, 4.0), Error);
  CHECK_THROWS_AS(delta_factor(0.0, 3.0, 1.0, 1.0, 4.0), Error);
}

TEST_CASE("delta factor near the branch boundary stays finite") {
  const double kappa = 4.0, r = 0.5, y0 = 0.05, lambda = 6.0;
  for (double shift : {-1e-6, 1e-6}) {
    const double b = kappa * (r + shift) / 2.0;
    const double v = delta_factor(y0, lambda, r, b, kappa);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
}

TEST_CASE("optimized exponents") {
  const auto eight = optimize_exponents(8.0);
  CHECK(eight.alpha == 2.0);
  CHECK(eight.alpha_from_b == 2.0);
  const auto four = optimize_exponents(4.0);
  CHECK(four.r0 == 0.75);
  CHECK(four.b0 == doctest::Approx(1.875).epsilon(1e-15));
  CHECK(four.b0_closed == doctest::Approx(1.875).epsilon(1e-15));
  CHECK(four.alpha == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(four.alpha_series == doctest::Approx(2.25).epsilon(1e-15));
  CHECK(four.alpha_from_b == doctest::Approx(2.25).epsilon(1e-15));
  // 2 b0 - 2 r0 / kappa is a different quantity.
  CHECK(four.two_b_minus_2r_over_kappa == doctest::Approx(3.375).epsilon(1e-15));
  for (double kappa : {2.5, 3.0, 4.0, 6.0, 7.5}) {
    const auto o = optimize_exponents(kappa);
    CHECK(o.alpha > 2.0);
    CHECK(std::abs(o.grid_argmax - o.r0) <= o.grid_spacing);
    CHECK(o.beta_low < 1.0);
    CHECK(o.b0 == doctest::Approx(o.b0_closed).epsilon(1e-14));
    CHECK(o.alpha_from_b == doctest::Approx(o.alpha).epsilon(1e-14));
    // Brute-force oracle: alpha(r) never exceeds alpha(r0).
    for (int i = 0; i <= 1000; ++i) CHECK(alpha_of_r(kappa, (4.0 / kappa + 1.0) * i / 1000.0) <= o.alpha + 1e-12);
  }
}

TEST_CASE("alpha is continuous along the kappa grid") {
  double prev = optimize_exponents(2.5).alpha;
  for (double kappa = 2.51; kappa <= 7.5; kappa += 0.01) {
    const double a = optimize_exponents(kappa).alpha;
    CHECK(std::abs(a - prev) < 0.02);
    prev = a;
  }
}

TEST_CASE("empirical tail estimator") {
  std::vector<double> low(200, 0.5), high(200, 3.0);
  const auto a = empirical_tail(low, 1.0);
  CHECK(a.p_hat == 0.0);
  CHECK(a.ci_low == 0.0);
  CHECK(empirical_tail(high, 1.0).p_hat == 1.0);
  std::vector<double> bern;
  for (int i = 0; i < 10000; ++i) bern.push_back(rng::uniform(31, 0, i) < 0.1 ? 2.0 : 0.0);
  const auto e = empirical_tail(bern, 1.0);
  CHECK(e.ci_low < 0.1);
  CHECK(e.ci_high > 0.1);
  CHECK_THROWS_AS(empirical_tail(std::vector<double>{}, 1.0), Error);
  CHECK_THROWS_AS(empirical_tail(std::vector<double>(50, 1.0), 1.0), Error);
}

TEST_CASE("capacity is the maximum over the grid") {
  KappaProbability a{3.0, {0.1, 0, 1, 10, 100}}, b{4.0, {0.2, 0, 1, 20, 100}};
  CHECK(capacity_from("x", {a, b}).cap == 0.2);
  const auto never = capacity("never", [](const driver::DriverPath&) { return false; },
                              KappaGrid::make({3.0, 4.0}), 50);
  CHECK(never.cap == 0.0);
  CHECK(never.per_kappa.size() == 2);
}

TEST_CASE("enlarging the kappa grid never lowers the capacity") {
  auto event = [](const driver::DriverPath& d) { return std::abs(d.at(1.0)) > 2.0; };
  PathSource src{3, 1.0, 9, 0, 1};
  const auto small = capacity("U_1 > 2", event, KappaGrid::make({2.5, 4.0}), 300, src);
  const auto large = capacity("U_1 > 2", event, KappaGrid::make({2.5, 4.0, 6.0}), 300, src);
  CHECK(large.cap >= small.cap);
  CHECK(large.per_kappa[0].estimate.hits == small.per_kappa[0].estimate.hits);
  // Coupled paths: the event grows with kappa.
  CHECK(large.per_kappa[2].estimate.hits >= large.per_kappa[1].estimate.hits);
}

TEST_CASE("capacity of a derivative event stays below the original-time bound") {
  const auto grid = KappaGrid::make({3.0, 4.0, 6.0});
  const double lambda = std::exp2(4 * (1 - 0.05)), t = 1.0;
  const auto cap = capacity(
      "h'", [&](const driver::DriverPath& d) {
        const auto f = loewner::evolve_backward(d, {0, 1.0 / 16}, 1.0, {},
                                                loewner::Parametrization::standard,
                                                std::span<const double>(&t, 1));
        return std::abs(f.derivative.back()) >= lambda;
      },
      grid, 400);
  double sup_bound = 0.0;
  for (double kappa : grid.points)
    sup_bound = std::max(sup_bound, original_time_tail_bound(kappa, 1.0 / 16, 1.0, lambda));
  CHECK(sup_bound < 1.0);
  for (const auto& k : cap.per_kappa) CHECK(k.estimate.ci_low <= sup_bound);
}

TEST_CASE("original-time bound edges") {
  // No new time elapses at t = 0, and |h'| cannot exceed e^{2j/kappa}.
  CHECK(original_time_tail_bound(4.0, 0.1, 0.0, 3.0) == 0.0);
  CHECK(original_time_tail_bound(4.0, 0.5, 1.0, 1e6) == 0.0);
  const double v = original_time_tail_bound(3.0, 1.0 / 16, 1.0, std::exp2(3.8));
  CHECK(v > 0.0);
  CHECK(v < 0.05);
}

TEST_CASE("Borel-Cantelli theoretical mode converges") {
  const auto grid = KappaGrid::make({2.5, 3.0, 4.0, 6.0, 7.5});
  const double beta = default_bc_beta(grid, 0.05);
  CHECK(beta < 1.0);
  for (double kappa : grid.points) {
    const auto o = optimize_exponents(kappa);
    CHECK(beta > o.beta_low);
    CHECK(bc_asymptotic_ratio(kappa, beta) < 1.0);
  }
  BcOptions opts;
  opts.n_max = 6;
  const auto terms = borel_cantelli_sums(grid, 0.05, opts);
  REQUIRE(terms.size() == 6);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    CHECK(terms[i].term < terms[i - 1].term);
    CHECK(terms[i].partial_sum > terms[i - 1].partial_sum);
    CHECK(terms[i].constant_free_total > 0.0);
  }
  CHECK(terms[0].dyadic_times == 5);
}

TEST_CASE("Borel-Cantelli empirical mode with an unreachable threshold is zero") {
  BcOptions opts;
  opts.mode = BcMode::empirical;
  opts.beta = 3.0;
  opts.n_max = 3;
  opts.n_paths = 20;
  const auto terms = borel_cantelli_sums(KappaGrid::make({4.0}), 0.05, opts);
  for (const auto& t : terms) CHECK(t.partial_sum == 0.0);
  opts.n_max = 7;
  CHECK_THROWS_AS(borel_cantelli_sums(KappaGrid::make({4.0}), 0.05, opts), Error);
}

TEST_CASE("existence certificate for the zero driver") {
  const auto d = driver::couple(driver::injected_path(5, 1.0, [](double) { return 0.0; }), 3.0);
  const auto rep = existence_certificate(d, 4, 0.05);
  CHECK(rep.holds);
  CHECK(rep.modulus_ok);
  // |f'_t(iy)| = y / sqrt(y^2 + 4t) peaks at t = 0.
  for (int j = 1; j <= 4; ++j) CHECK(rep.r_j[j - 1] == doctest::Approx(std::ldexp(1.0, -j)).epsilon(1e-8));
  CHECK(rep.decay_rate == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("existence certificate on a sampled path") {
  const auto d = driver::couple(driver::sample_brownian(rng::derive_seed(7, 13, 0), 5, 1.0), 3.0);
  const auto rep = existence_certificate(d, 5, 0.05);
  CHECK(rep.holds);
  CHECK(rep.decay_rate > 0.05);
  CHECK(rep.corner_errors.empty());
  CHECK(rep.abs_derivative[4].size() == 1025);
}

TEST_CASE("existence certificate flags a modulus violation") {
  // A jump of height 5 inside one grid cell breaks the modulus bound at every scale.
  const auto d = driver::couple(
      driver::injected_path(5, 1.0, [](double t) { return t < 0.5 ? 0.0 : 5.0; }), 3.0);
  const auto rep = existence_certificate(d, 2, 0.05);
  CHECK_FALSE(rep.modulus_ok);
  CHECK_FALSE(rep.holds);
  const auto short_driver = driver::couple(driver::sample_brownian(1, 5, 0.5), 3.0);
  CHECK_THROWS_AS(existence_certificate(short_driver, 2, 0.05), Error);
}

TEST_CASE("distribution identity edge cases") {
  const auto deg = distribution_identity_test(4.0, 0.0, {0, 1}, 500, 1);
  CHECK(deg.degenerate);
  CHECK(deg.real.statistic == 0.0);
  CHECK(deg.imag.p_value == 1.0);
  CHECK_THROWS_AS(distribution_identity_test(4.0, 0.5, {0, 1}, 100, 1), Error);
}

TEST_CASE("martingale report averages M") {
  const std::vector<double> grid{0.0, 0.5};
  const auto paths = radial::radial_batch(4.0, {0, 1}, grid, 200, 3, 0);
  const auto exps = radial::exponents_from_r(4.0, 0.75);
  const auto start = martingale_report(paths, exps, 0);
  CHECK(start.mean_M == doctest::Approx(start.M0));
  CHECK(start.stderr_M == doctest::Approx(0.0));
  const auto later = martingale_report(paths, exps, 1);
  CHECK(later.t == 0.5);
  CHECK(std::abs(later.mean_M - later.M0) <= std::max(0.1 * later.M0, 4.0 * later.stderr_M));
}
