#include <doctest.h>

#include <cmath>
#include <vector>

#include "sle/driver_gen.hpp"
#include "sle/errors.hpp"
#include "sle/loewner_engine.hpp"
#include "sle/philox.hpp"
#include "sle/radial_diffusion.hpp"

using namespace sle;
using namespace sle::radial;
using driver::couple;
using driver::injected_path;
using driver::sample_brownian;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("new-time imaginary part grows exponentially") {
  const auto d = couple(sample_brownian(21, 5, 8.0), 2.0);
  const double grid[] = {0.0, 0.5, 1.0};
  const RadialPath p = direct_flow(d, {0, 0.5}, grid);
  CHECK(p.Y.back() == doctest::Approx(0.5 * std::exp(1.0)).epsilon(1e-3));
  CHECK(p.Y.back() == doctest::Approx(1.3591409).epsilon(1e-3));
  CHECK(p.y_residual <= 1e-3);
  CHECK(p.sigma.front() == 0.0);
  for (std::size_t i = 1; i < p.sigma.size(); ++i) CHECK(p.sigma[i] > p.sigma[i - 1]);
}

TEST_CASE("symmetric start with zero driver keeps R = 0") {
  const auto d = couple(injected_path(3, 16.0, [](double) { return 0.0; }), 3.0);
  const auto grid = linspace(0, 1, 11);
  const RadialPath p = direct_flow(d, {0, 1}, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(p.R[i] == 0.0);
    CHECK(p.N[i] == 0.0);
    CHECK(std::exp(p.log_deriv[i]) == doctest::Approx(derivative_from_N(3.0, grid[i], 0.0)).epsilon(1e-9));
  }
}

TEST_CASE("N is computed from R and stays in [0, 1)") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto d = couple(sample_brownian(seed, 5, 16.0), 4.0);
    const RadialPath p = direct_flow(d, {0.2, 1.0}, linspace(0, 1, 21));
    for (std::size_t i = 0; i < p.R.size(); ++i) {
      CHECK(p.N[i] == p.R[i] * p.R[i] / (1.0 + p.R[i] * p.R[i]));
      CHECK(p.N[i] >= 0.0);
      CHECK(p.N[i] < 1.0);
      CHECK(p.R[i] == p.X[i] / p.Y[i]);
    }
  }
}

TEST_CASE("derivative from N matches the variational equation and the backward flow") {
  for (double kappa : {2.5, 4.0, 6.0}) {
    const auto d = couple(sample_brownian(77, 6, 32.0), kappa);
    const auto grid = linspace(0, 1, 5);
    const RadialPath p = direct_flow(d, {0, 1}, grid);
    const auto bwd = loewner::evolve_backward(d, {0, 1}, p.sigma.back(), {},
                                              loewner::Parametrization::two_over_kappa,
                                              std::span<const double>(p.sigma));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double from_n = std::log(derivative_from_N(kappa, grid[i], p.intN[i]));
      CHECK(std::abs(p.log_deriv[i] - from_n) <= 1e-3 * std::abs(p.log_deriv[i]) + 1e-6);
      CHECK(std::abs(std::log(std::abs(bwd.derivative[i])) - from_n) <= 1e-3 * std::abs(from_n) + 1e-6);
      // Schwarz-Pick in the new time.
      CHECK(derivative_from_N(kappa, grid[i], p.intN[i]) <= p.Y[i] * (1 + 1e-9));
    }
  }
}

TEST_CASE("standard parametrization gives the same new-time law") {
  const double kappa = 3.0;
  const auto d = couple(sample_brownian(5, 6, 32.0), kappa);
  RadialOptions std_opts;
  std_opts.param = loewner::Parametrization::standard;
  const auto grid = linspace(0, 1, 5);
  const RadialPath a = direct_flow(d, {0.3, 1.0}, grid);
  const RadialPath b = direct_flow(d, std::sqrt(kappa) * cplx(0.3, 1.0), grid, std_opts);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a.R[i] == doctest::Approx(b.R[i]).epsilon(1e-7));
    CHECK(a.intN[i] == doctest::Approx(b.intN[i]).epsilon(1e-7));
    CHECK(b.sigma[i] == doctest::Approx(a.sigma[i]).epsilon(1e-7));
  }
}

TEST_CASE("horizon exceeded is reported") {
  const auto d = couple(sample_brownian(5, 3, 0.25), 3.0);
  const double grid[] = {0.0, 1.0};
  try {
    direct_flow(d, {0, 1}, grid);
    FAIL("expected horizon-exceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::horizon_exceeded);
  }
}

TEST_CASE("SDE fixed points and boundary handling") {
  const auto quiet = injected_path(4, 1.0, [](double) { return 0.0; });
  for (double r : simulate_R_sde(4.0, 0.0, quiet.step, quiet, -1)) CHECK(r == 0.0);
  const auto n = simulate_N_sde(4.0, 0.0, quiet.step, quiet);
  CHECK(n[1] == doctest::Approx(quiet.step));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto noise = sample_brownian(seed, 5, 1.0);
    for (double v : simulate_N_sde(2.5, 0.3, 4 * noise.step, noise)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK_THROWS_AS(simulate_R_sde(4.0, 0.0, 0.3 * quiet.step, quiet, -1), Error);
  CHECK_THROWS_AS(simulate_R_sde(4.0, 0.0, quiet.step, quiet, 0), Error);
  CHECK_THROWS_AS(simulate_N_sde(4.0, 1.0, quiet.step, quiet), Error);
}

TEST_CASE("second moment of R follows its linear ODE only for the contracting drift") {
  // With drift -4/kappa, E[R^2] = (1 - e^{-m s}) / m where m = 8/kappa - 1.
  const double kappa = 4.0, s = 0.5;
  const int paths = 4000;
  double neg = 0.0, pos = 0.0, neg2 = 0.0;
  for (int i = 0; i < paths; ++i) {
    const auto noise = sample_brownian(rng::derive_seed(3, 9, i), 5, s * 2);
    const double dt = noise.step;
    const std::size_t k = static_cast<std::size_t>(std::llround(s / dt));
    const double a = simulate_R_sde(kappa, 0.0, dt, noise, -1)[k];
    const double b = simulate_R_sde(kappa, 0.0, dt, noise, +1)[k];
    neg += a * a / paths;
    neg2 += a * a * a * a / paths;
    pos += b * b / paths;
  }
  const double m = 8.0 / kappa - 1.0;
  const double expected = (1.0 - std::exp(-m * s)) / m;
  const double se = std::sqrt((neg2 - neg * neg) / paths);
  CHECK(std::abs(neg - expected) <= 3.0 * se + 0.01);
  CHECK(std::abs(pos - expected) > 10.0 * se);
}

TEST_CASE("Euler-Maruyama strong error shrinks like sqrt(dt)") {
  const double kappa = 4.0;
  std::vector<double> err(3, 0.0);
  const int paths = 300;
  for (int i = 0; i < paths; ++i) {
    const auto noise = sample_brownian(rng::derive_seed(8, 2, i), 6, 1.0);
    const double ref = simulate_R_sde(kappa, 0.5, noise.step, noise, -1).back();
    for (int j = 0; j < 3; ++j) {
      const double dt = noise.step * (16 >> j);
      err[j] += std::abs(simulate_R_sde(kappa, 0.5, dt, noise, -1).back() - ref) / paths;
    }
  }
  for (int j = 1; j < 3; ++j) {
    const double ratio = err[j - 1] / err[j];
    CHECK(ratio > 1.2);
    CHECK(ratio < 1.75);
  }
}

TEST_CASE("exponent pairs") {
  CHECK(exponents_from_r(3.0, 0.0).b == 0.0);
  const ExponentPair e = exponents_from_r(4.0, 0.75);
  CHECK(e.b == doctest::Approx(1.875));
  CHECK(e.b == doctest::Approx(2.0 / 4.0 + 1.0 + 3.0 / (32.0 / 4.0)));
  for (double kappa : {0.7, 2.5, 4.0, 6.0, 7.5, 12.0})
    for (double r : linspace(0.0, 4.0 / kappa + 1.0, 17)) {
      const ExponentPair p = exponents_from_r(kappa, r);
      CHECK(std::abs(p.residual) <= 1e-12);
      CHECK(p.b >= -1e-12);
    }
}

TEST_CASE("martingale initial values") {
  const auto d = couple(sample_brownian(4, 5, 16.0), 3.0);
  const auto grid = linspace(0, 1, 3);
  const ExponentPair e = exponents_from_r(3.0, 0.25 + 2.0 / 3.0);
  const auto m = martingale_path(direct_flow(d, {0, 1}, grid), e);
  CHECK(m.front().M == doctest::Approx(1.0));
  for (const auto& s : m) CHECK(s.M == doctest::Approx(s.y_power * s.angle * s.deriv).epsilon(1e-12));

  const cplx z0(0.3, 0.5);
  const auto m2 = martingale_path(direct_flow(d, z0, grid), e);
  CHECK(m2.front().M == doctest::Approx(std::pow(0.5, e.b - 1.5 * e.r) * std::pow(std::abs(z0) / 0.5, 2 * e.r)));
  CHECK(martingale_start(z0, e) == doctest::Approx(m2.front().M));

  for (const auto& s : martingale_path(direct_flow(d, z0, grid), exponents_from_r(3.0, 0.0))) CHECK(s.M == 1.0);
  CHECK_THROWS_AS(martingale_path(direct_flow(d, z0, grid), exponents_from_r(4.0, 0.5)), Error);
}

TEST_CASE("martingale mean is preserved at kappa 3") {
  const double kappa = 3.0;
  const ExponentPair e = exponents_from_r(kappa, 0.25 + 2.0 / kappa);
  const double grid[] = {0.0, 0.5};
  const auto paths = radial_batch(kappa, {0, 1}, grid, 2000, 5, 0);
  double s = 0.0, s2 = 0.0;
  for (const auto& p : paths) {
    const double m = martingale_path(p, e).back().M;
    s += m;
    s2 += m * m;
  }
  const double n = double(paths.size());
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 1.0) <= std::max(0.05, 3.0 * se));
}
